//! DEX string-pool extraction.
//!
//! Only the string_ids table is read; bytecode is never interpreted. Strings
//! are MUTF-8 (CESU-8 surrogate pairs, `C0 80` embedded NUL); undecodable
//! sequences become U+FFFD and are counted rather than aborting extraction,
//! because obfuscated apps routinely carry garbage strings.

use serde::Serialize;
use thiserror::Error;

use crate::zip::{ApkContainer, ZipError};

const HEADER_LEN: usize = 112;
const STRING_IDS_SIZE_OFF: usize = 56;
const STRING_IDS_OFF_OFF: usize = 60;

#[derive(Debug, Error)]
pub enum DexError {
    #[error("`{name}` has dex magic {magic:02x?}")]
    BadDexMagic { name: String, magic: Vec<u8> },
    #[error("`{name}` truncated while reading {what}")]
    TruncatedDex { name: String, what: &'static str },
    #[error("`{name}` has an overlong uleb128 length")]
    BadUleb128 { name: String },
    #[error(transparent)]
    Container(#[from] ZipError),
}

/// Merged string pools of every `classes*.dex` entry, in entry-name order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DexStringTable {
    /// All pool strings, string_ids index order within each DEX.
    pub strings: Vec<String>,
    /// Dotted class names derived from `L…;` type descriptors in `strings`.
    pub class_names: Vec<String>,
    pub dex_count: usize,
    /// How many undecodable MUTF-8 sequences were replaced with U+FFFD.
    pub replacement_count: usize,
}

/// Extract and merge the string pools of all DEX entries. An APK with no
/// `classes*.dex` entry yields an empty table.
pub fn extract_dex_strings(container: &ApkContainer) -> Result<DexStringTable, DexError> {
    let mut names: Vec<&str> = container
        .entries()
        .iter()
        .map(|e| e.name.as_str())
        .filter(|n| is_dex_entry(n))
        .collect();
    names.sort_unstable();

    let mut table = DexStringTable::default();
    for name in names {
        let bytes = container.read_entry(name)?;
        parse_dex(name, &bytes, &mut table)?;
        table.dex_count += 1;
    }
    Ok(table)
}

fn is_dex_entry(name: &str) -> bool {
    let Some(middle) = name.strip_prefix("classes").and_then(|r| r.strip_suffix(".dex")) else {
        return false;
    };
    middle.is_empty() || middle.bytes().all(|b| b.is_ascii_digit())
}

fn parse_dex(name: &str, bytes: &[u8], table: &mut DexStringTable) -> Result<(), DexError> {
    let trunc = |what| DexError::TruncatedDex {
        name: name.to_string(),
        what,
    };
    let header = bytes.get(..HEADER_LEN).ok_or_else(|| trunc("header"))?;
    if !magic_ok(&header[..8]) {
        return Err(DexError::BadDexMagic {
            name: name.to_string(),
            magic: header[..8].to_vec(),
        });
    }
    let count = read_u32(header, STRING_IDS_SIZE_OFF) as usize;
    let ids_off = read_u32(header, STRING_IDS_OFF_OFF) as usize;
    let ids_end = ids_off
        .checked_add(count.checked_mul(4).ok_or_else(|| trunc("string_ids"))?)
        .ok_or_else(|| trunc("string_ids"))?;
    let ids = bytes.get(ids_off..ids_end).ok_or_else(|| trunc("string_ids"))?;

    table.strings.reserve(count);
    for id in ids.chunks_exact(4) {
        let data_off = u32::from_le_bytes([id[0], id[1], id[2], id[3]]) as usize;
        let tail = bytes.get(data_off..).ok_or_else(|| trunc("string_data"))?;
        let (_, payload_at) = read_uleb128(tail).ok_or(DexError::BadUleb128 {
            name: name.to_string(),
        })?;
        let payload = tail.get(payload_at..).ok_or_else(|| trunc("string_data"))?;
        let nul = payload
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| trunc("string terminator"))?;
        let (decoded, replaced) = decode_mutf8(&payload[..nul]);
        table.replacement_count += replaced;
        if let Some(class) = descriptor_to_class(&decoded) {
            table.class_names.push(class);
        }
        table.strings.push(decoded);
    }
    Ok(())
}

/// Caller guarantees `off + 4 <= data.len()` (header length is checked).
fn read_u32(data: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([data[off], data[off + 1], data[off + 2], data[off + 3]])
}

fn magic_ok(magic: &[u8]) -> bool {
    magic.starts_with(b"dex\n0")
        && magic[5] == b'3'
        && (b'5'..=b'9').contains(&magic[6])
        && magic[7] == 0
}

/// ULEB128, at most five bytes for a u32 value. Returns (value, bytes read).
fn read_uleb128(data: &[u8]) -> Option<(u32, usize)> {
    let mut value: u32 = 0;
    for (i, &b) in data.iter().enumerate().take(5) {
        value |= ((b & 0x7f) as u32) << (7 * i as u32);
        if b & 0x80 == 0 {
            return Some((value, i + 1));
        }
    }
    None
}

/// `Lcom/ex/Main;` → `com.ex.Main`; anything else is not a class descriptor.
fn descriptor_to_class(s: &str) -> Option<String> {
    let inner = s.strip_prefix('L')?.strip_suffix(';')?;
    if inner.is_empty() {
        return None;
    }
    let ok = inner
        .bytes()
        .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b == b'/');
    if ok {
        Some(inner.replace('/', "."))
    } else {
        None
    }
}

fn decode_mutf8(raw: &[u8]) -> (String, usize) {
    fn bad(out: &mut String, replaced: &mut usize) {
        out.push('\u{fffd}');
        *replaced += 1;
    }
    let mut out = String::with_capacity(raw.len());
    let mut replaced = 0usize;
    let mut i = 0;
    while i < raw.len() {
        let b0 = raw[i];
        if b0 < 0x80 {
            out.push(b0 as char);
            i += 1;
        } else if b0 & 0xe0 == 0xc0 {
            match raw.get(i + 1) {
                Some(&b1) if b1 & 0xc0 == 0x80 => {
                    let cp = ((b0 as u32 & 0x1f) << 6) | (b1 as u32 & 0x3f);
                    // Two-byte sequences cannot reach the surrogate range.
                    out.push(char::from_u32(cp).unwrap_or('\u{fffd}'));
                    i += 2;
                }
                _ => {
                    bad(&mut out, &mut replaced);
                    i += 1;
                }
            }
        } else if b0 & 0xf0 == 0xe0 {
            match three_byte_unit(raw, i) {
                Some(unit) if (0xd800..0xdc00).contains(&unit) => {
                    // High surrogate: must pair with a following low surrogate.
                    match three_byte_unit(raw, i + 3) {
                        Some(low) if (0xdc00..0xe000).contains(&low) => {
                            let cp = 0x10000 + ((unit - 0xd800) << 10) + (low - 0xdc00);
                            match char::from_u32(cp) {
                                Some(c) => out.push(c),
                                None => bad(&mut out, &mut replaced),
                            }
                            i += 6;
                        }
                        _ => {
                            bad(&mut out, &mut replaced);
                            i += 3;
                        }
                    }
                }
                Some(unit) if (0xdc00..0xe000).contains(&unit) => {
                    bad(&mut out, &mut replaced);
                    i += 3;
                }
                Some(unit) => {
                    match char::from_u32(unit) {
                        Some(c) => out.push(c),
                        None => bad(&mut out, &mut replaced),
                    }
                    i += 3;
                }
                None => {
                    bad(&mut out, &mut replaced);
                    i += 1;
                }
            }
        } else {
            bad(&mut out, &mut replaced);
            i += 1;
        }
    }
    (out, replaced)
}

fn three_byte_unit(raw: &[u8], at: usize) -> Option<u32> {
    let b0 = *raw.get(at)?;
    let b1 = *raw.get(at + 1)?;
    let b2 = *raw.get(at + 2)?;
    if b0 & 0xf0 == 0xe0 && b1 & 0xc0 == 0x80 && b2 & 0xc0 == 0x80 {
        Some(((b0 as u32 & 0x0f) << 12) | ((b1 as u32 & 0x3f) << 6) | (b2 as u32 & 0x3f))
    } else {
        None
    }
}
