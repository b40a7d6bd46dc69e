//! Android binary XML (AXML) manifest decoder.
//!
//! Decodes the chunk subset real manifests use: string pool (UTF-8 and
//! UTF-16), resource map, namespaces, elements, CDATA. Unknown chunk types
//! are skipped by their declared size so vendor extensions never abort
//! extraction. Full resource-table resolution is out of scope; reference
//! values render as `@0x%08x` strings.

use serde::Serialize;
use thiserror::Error;

const CHUNK_XML: u16 = 0x0003;
const CHUNK_STRING_POOL: u16 = 0x0001;
const CHUNK_ELEMENT_START: u16 = 0x0102;

const UTF8_FLAG: u32 = 1 << 8;
const NO_INDEX: u32 = 0xffff_ffff;
const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

const TYPE_REFERENCE: u8 = 0x01;
const TYPE_STRING: u8 = 0x03;
const TYPE_INT_DEC: u8 = 0x10;
const TYPE_INT_HEX: u8 = 0x11;
const TYPE_INT_BOOLEAN: u8 = 0x12;

#[derive(Debug, Error)]
pub enum AxmlError {
    #[error("first chunk type 0x{0:04x} is not a binary xml document")]
    BadChunkHeader(u16),
    #[error("chunk truncated while reading {0}")]
    TruncatedChunk(&'static str),
    #[error("attribute references string index {index} but pool holds {pool_size}")]
    BadStringIndex { index: u32, pool_size: usize },
    #[error("manifest has no package attribute")]
    MissingPackage,
}

/// Manifest-derived metadata. Permissions are sorted and deduplicated;
/// relative component names (leading dot) are qualified with the package.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestInfo {
    pub package_name: String,
    pub version_code: u32,
    pub version_name: String,
    pub app_label: String,
    pub permissions: Vec<String>,
    pub activities: Vec<String>,
    pub services: Vec<String>,
    pub icon_ref: Option<String>,
}

/// Decode a binary `AndroidManifest.xml`.
pub fn decode_manifest(axml_bytes: &[u8]) -> Result<ManifestInfo, AxmlError> {
    let doc_type = read_u16(axml_bytes, 0, "document header")?;
    if doc_type != CHUNK_XML {
        return Err(AxmlError::BadChunkHeader(doc_type));
    }
    let header_size = read_u16(axml_bytes, 2, "document header")? as usize;
    let doc_size = read_u32(axml_bytes, 4, "document header")? as usize;
    if header_size < 8 || doc_size > axml_bytes.len() || doc_size < header_size {
        return Err(AxmlError::TruncatedChunk("document header"));
    }

    let mut pool = StringPool::default();
    let mut package_name: Option<String> = None;
    let mut version_code = 0u32;
    let mut version_name = String::new();
    let mut app_label = String::new();
    let mut icon_ref: Option<String> = None;
    let mut permissions: Vec<String> = Vec::new();
    let mut activities: Vec<String> = Vec::new();
    let mut services: Vec<String> = Vec::new();

    let mut pos = header_size;
    while pos + 8 <= doc_size {
        let chunk_type = read_u16(axml_bytes, pos, "chunk header")?;
        let chunk_size = read_u32(axml_bytes, pos + 4, "chunk header")? as usize;
        if chunk_size < 8 || pos + chunk_size > doc_size {
            return Err(AxmlError::TruncatedChunk("chunk body"));
        }
        let chunk = &axml_bytes[pos..pos + chunk_size];
        match chunk_type {
            CHUNK_STRING_POOL => pool = StringPool::parse(chunk)?,
            CHUNK_ELEMENT_START => {
                let element = Element::parse(chunk, &pool)?;
                match element.name.as_str() {
                    "manifest" => {
                        package_name = element.plain_attr("package").map(|v| v.render());
                        if let Some(v) = element.android_attr("versionCode") {
                            version_code = v.as_u32();
                        }
                        if let Some(v) = element.android_attr("versionName") {
                            version_name = v.render();
                        }
                    }
                    "uses-permission" => {
                        if let Some(v) = element.android_attr("name") {
                            permissions.push(v.render());
                        }
                    }
                    "application" => {
                        if let Some(v) = element.android_attr("label") {
                            app_label = v.render();
                        }
                        if let Some(v) = element.android_attr("icon") {
                            icon_ref = Some(v.render());
                        }
                    }
                    "activity" => {
                        if let Some(v) = element.android_attr("name") {
                            activities.push(v.render());
                        }
                    }
                    "service" => {
                        if let Some(v) = element.android_attr("name") {
                            services.push(v.render());
                        }
                    }
                    _ => {}
                }
            }
            // Namespace, end-element, CDATA, resource map, vendor chunks:
            // nothing to extract, skip by declared size.
            _ => {}
        }
        pos += chunk_size;
    }

    let package_name = match package_name {
        Some(p) if !p.is_empty() => p,
        _ => return Err(AxmlError::MissingPackage),
    };
    permissions.sort();
    permissions.dedup();
    let qualify = |name: String| {
        if name.starts_with('.') {
            format!("{package_name}{name}")
        } else {
            name
        }
    };
    Ok(ManifestInfo {
        activities: activities.into_iter().map(qualify).collect(),
        services: services.into_iter().map(qualify).collect(),
        package_name,
        version_code,
        version_name,
        app_label,
        permissions,
        icon_ref,
    })
}

#[derive(Default)]
struct StringPool {
    strings: Vec<String>,
}

impl StringPool {
    fn parse(chunk: &[u8]) -> Result<StringPool, AxmlError> {
        let header_size = read_u16(chunk, 2, "string pool header")? as usize;
        let count = read_u32(chunk, 8, "string pool header")? as usize;
        let flags = read_u32(chunk, 16, "string pool header")?;
        let strings_start = read_u32(chunk, 20, "string pool header")? as usize;
        // Offset table must fit before any allocation sized from `count`.
        let table_end = header_size
            .checked_add(count.checked_mul(4).ok_or(AxmlError::TruncatedChunk("string offsets"))?)
            .ok_or(AxmlError::TruncatedChunk("string offsets"))?;
        if table_end > chunk.len() {
            return Err(AxmlError::TruncatedChunk("string offsets"));
        }
        let utf8 = flags & UTF8_FLAG != 0;
        let mut strings = Vec::with_capacity(count);
        for i in 0..count {
            let rel = read_u32(chunk, header_size + 4 * i, "string offset")? as usize;
            let at = strings_start
                .checked_add(rel)
                .ok_or(AxmlError::TruncatedChunk("string data"))?;
            let s = if utf8 {
                read_utf8_string(chunk, at)?
            } else {
                read_utf16_string(chunk, at)?
            };
            strings.push(s);
        }
        Ok(StringPool { strings })
    }

    fn get(&self, index: u32) -> Result<&str, AxmlError> {
        self.strings
            .get(index as usize)
            .map(String::as_str)
            .ok_or(AxmlError::BadStringIndex {
                index,
                pool_size: self.strings.len(),
            })
    }
}

/// A decoded attribute value, preserving the typed representation.
enum Value {
    Str(String),
    Int(u32),
    Hex(u32),
    Bool(bool),
    Ref(u32),
    Raw(u32),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Str(s) => s.clone(),
            Value::Int(v) => v.to_string(),
            Value::Hex(v) => format!("0x{v:x}"),
            Value::Bool(b) => b.to_string(),
            Value::Ref(r) => format!("@0x{r:08x}"),
            Value::Raw(v) => v.to_string(),
        }
    }

    fn as_u32(&self) -> u32 {
        match self {
            Value::Int(v) | Value::Hex(v) | Value::Raw(v) => *v,
            Value::Str(s) => s.parse().unwrap_or(0),
            Value::Bool(b) => *b as u32,
            Value::Ref(_) => 0,
        }
    }
}

struct Attribute {
    namespace: Option<String>,
    name: String,
    value: Value,
}

struct Element {
    name: String,
    attributes: Vec<Attribute>,
}

impl Element {
    fn parse(chunk: &[u8], pool: &StringPool) -> Result<Element, AxmlError> {
        let header_size = read_u16(chunk, 2, "element header")? as usize;
        let ext = header_size;
        let name_idx = read_u32(chunk, ext + 4, "element name")?;
        let attr_start = read_u16(chunk, ext + 8, "element attributes")? as usize;
        let attr_size = read_u16(chunk, ext + 10, "element attributes")? as usize;
        let attr_count = read_u16(chunk, ext + 12, "element attributes")? as usize;
        let name = pool.get(name_idx)?.to_string();
        let mut attributes = Vec::with_capacity(attr_count);
        for i in 0..attr_count {
            let at = ext + attr_start + i * attr_size;
            let ns_idx = read_u32(chunk, at, "attribute")?;
            let name_idx = read_u32(chunk, at + 4, "attribute")?;
            let raw_idx = read_u32(chunk, at + 8, "attribute")?;
            let data_type = *chunk
                .get(at + 15)
                .ok_or(AxmlError::TruncatedChunk("attribute"))?;
            let data = read_u32(chunk, at + 16, "attribute")?;
            let namespace = if ns_idx == NO_INDEX {
                None
            } else {
                Some(pool.get(ns_idx)?.to_string())
            };
            let value = match data_type {
                TYPE_STRING => Value::Str(pool.get(data)?.to_string()),
                TYPE_REFERENCE => Value::Ref(data),
                TYPE_INT_DEC => Value::Int(data),
                TYPE_INT_HEX => Value::Hex(data),
                TYPE_INT_BOOLEAN => Value::Bool(data != 0),
                _ if raw_idx != NO_INDEX => Value::Str(pool.get(raw_idx)?.to_string()),
                _ => Value::Raw(data),
            };
            attributes.push(Attribute {
                namespace,
                name: pool.get(name_idx)?.to_string(),
                value,
            });
        }
        Ok(Element { name, attributes })
    }

    fn android_attr(&self, name: &str) -> Option<&Value> {
        self.attributes
            .iter()
            .find(|a| a.name == name && a.namespace.as_deref() == Some(ANDROID_NS))
            .map(|a| &a.value)
    }

    fn plain_attr(&self, name: &str) -> Option<&Value> {
        self.attributes
            .iter()
            .find(|a| a.name == name && a.namespace.is_none())
            .map(|a| &a.value)
    }
}

fn read_utf16_string(chunk: &[u8], at: usize) -> Result<String, AxmlError> {
    let first = read_u16(chunk, at, "utf-16 string")? as usize;
    let (len, payload) = if first & 0x8000 != 0 {
        let second = read_u16(chunk, at + 2, "utf-16 string")? as usize;
        ((first & 0x7fff) << 16 | second, at + 4)
    } else {
        (first, at + 2)
    };
    let byte_len = len.checked_mul(2).ok_or(AxmlError::TruncatedChunk("utf-16 string"))?;
    let end = payload
        .checked_add(byte_len)
        .ok_or(AxmlError::TruncatedChunk("utf-16 string"))?;
    let raw = chunk
        .get(payload..end)
        .ok_or(AxmlError::TruncatedChunk("utf-16 string"))?;
    let units: Vec<u16> = raw
        .chunks_exact(2)
        .map(|pair| u16::from_le_bytes([pair[0], pair[1]]))
        .collect();
    Ok(String::from_utf16_lossy(&units))
}

fn read_utf8_string(chunk: &[u8], at: usize) -> Result<String, AxmlError> {
    // Two varint lengths precede the bytes: UTF-16 unit count, then byte count.
    let (_, p) = read_utf8_varint(chunk, at)?;
    let (byte_len, p) = read_utf8_varint(chunk, p)?;
    let end = p.checked_add(byte_len).ok_or(AxmlError::TruncatedChunk("utf-8 string"))?;
    let raw = chunk
        .get(p..end)
        .ok_or(AxmlError::TruncatedChunk("utf-8 string"))?;
    Ok(String::from_utf8_lossy(raw).into_owned())
}

fn read_utf8_varint(chunk: &[u8], at: usize) -> Result<(usize, usize), AxmlError> {
    let b0 = *chunk.get(at).ok_or(AxmlError::TruncatedChunk("utf-8 length"))? as usize;
    if b0 & 0x80 != 0 {
        let b1 = *chunk
            .get(at + 1)
            .ok_or(AxmlError::TruncatedChunk("utf-8 length"))? as usize;
        Ok(((b0 & 0x7f) << 8 | b1, at + 2))
    } else {
        Ok((b0, at + 1))
    }
}

fn read_u16(data: &[u8], off: usize, ctx: &'static str) -> Result<u16, AxmlError> {
    let end = off.checked_add(2).ok_or(AxmlError::TruncatedChunk(ctx))?;
    data.get(off..end)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or(AxmlError::TruncatedChunk(ctx))
}

fn read_u32(data: &[u8], off: usize, ctx: &'static str) -> Result<u32, AxmlError> {
    let end = off.checked_add(4).ok_or(AxmlError::TruncatedChunk(ctx))?;
    data.get(off..end)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(AxmlError::TruncatedChunk(ctx))
}
