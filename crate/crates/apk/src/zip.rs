//! Minimal ZIP central-directory reader.
//!
//! Only what APK triage needs: enumerate entries from the central directory
//! without touching entry bodies, then decompress individual entries on
//! demand (stored and deflate methods). CRC values are carried as metadata
//! and not verified; extraction never interprets payloads here.

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

const EOCD_MAGIC: u32 = 0x0605_4b50;
const CENTRAL_MAGIC: u32 = 0x0201_4b50;
const LOCAL_MAGIC: u32 = 0x0403_4b50;
const EOCD_MIN_LEN: usize = 22;
/// EOCD record + maximum trailing comment length.
const EOCD_SEARCH_WINDOW: usize = EOCD_MIN_LEN + u16::MAX as usize;

const METHOD_STORED: u16 = 0;
const METHOD_DEFLATE: u16 = 8;

#[derive(Debug, Error)]
pub enum ZipError {
    #[error("not a zip archive: {0}")]
    NotAZip(&'static str),
    #[error("archive contains no entries")]
    EmptyArchive,
    #[error("duplicate entry name `{0}`")]
    DuplicateEntry(String),
    #[error("truncated archive while reading {0}")]
    Truncated(&'static str),
    #[error("no entry named `{0}`")]
    MissingEntry(String),
    #[error("unsupported compression method {method} for `{name}`")]
    UnsupportedMethod { name: String, method: u16 },
    #[error("failed to inflate `{0}`")]
    BadDeflate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One central-directory record, sizes taken from the central directory
/// (authoritative even when the local header deferred them to a data
/// descriptor).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZipEntry {
    pub name: String,
    pub compressed_size: u64,
    pub uncompressed_size: u64,
    pub crc32: u32,
    #[serde(skip)]
    method: u16,
    #[serde(skip)]
    local_header_offset: u64,
}

/// An opened APK: the raw file bytes plus the enumerated central directory.
#[derive(Debug, Clone)]
pub struct ApkContainer {
    source_path: PathBuf,
    data: Vec<u8>,
    entries: Vec<ZipEntry>,
}

impl ApkContainer {
    pub fn source_path(&self) -> &Path {
        &self.source_path
    }

    /// Entries in central-directory order.
    pub fn entries(&self) -> &[ZipEntry] {
        &self.entries
    }

    pub fn total_size(&self) -> u64 {
        self.data.len() as u64
    }

    /// The raw package bytes; fingerprints are computed over these.
    pub fn file_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn entry(&self, name: &str) -> Option<&ZipEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn has_entry(&self, name: &str) -> bool {
        self.entry(name).is_some()
    }

    /// Decompress one entry body. Stored and deflate methods only.
    pub fn read_entry(&self, name: &str) -> Result<Vec<u8>, ZipError> {
        let entry = self
            .entry(name)
            .ok_or_else(|| ZipError::MissingEntry(name.to_string()))?;
        let off = entry.local_header_offset as usize;
        let header = self
            .data
            .get(off..off + 30)
            .ok_or(ZipError::Truncated("local file header"))?;
        if read_u32(header, 0) != LOCAL_MAGIC {
            return Err(ZipError::NotAZip("bad local file header magic"));
        }
        let name_len = read_u16(header, 26) as usize;
        let extra_len = read_u16(header, 28) as usize;
        let data_start = off + 30 + name_len + extra_len;
        let data_end = data_start
            .checked_add(entry.compressed_size as usize)
            .ok_or(ZipError::Truncated("entry body"))?;
        let body = self
            .data
            .get(data_start..data_end)
            .ok_or(ZipError::Truncated("entry body"))?;
        match entry.method {
            METHOD_STORED => Ok(body.to_vec()),
            METHOD_DEFLATE => {
                let mut out = Vec::with_capacity(entry.uncompressed_size as usize);
                flate2::bufread::DeflateDecoder::new(body)
                    .read_to_end(&mut out)
                    .map_err(|_| ZipError::BadDeflate(name.to_string()))?;
                Ok(out)
            }
            other => Err(ZipError::UnsupportedMethod {
                name: name.to_string(),
                method: other,
            }),
        }
    }
}

/// Open an APK and enumerate its central directory. No entry bodies are
/// decompressed.
pub fn open_apk(path: impl AsRef<Path>) -> Result<ApkContainer, ZipError> {
    let path = path.as_ref();
    let data = std::fs::read(path)?;
    let entries = parse_central_directory(&data)?;
    Ok(ApkContainer {
        source_path: path.to_path_buf(),
        data,
        entries,
    })
}

fn parse_central_directory(data: &[u8]) -> Result<Vec<ZipEntry>, ZipError> {
    if data.len() < EOCD_MIN_LEN {
        return Err(ZipError::NotAZip("too small for an end-of-central-directory record"));
    }
    let eocd = find_eocd(data).ok_or(ZipError::NotAZip("no end-of-central-directory magic"))?;
    let rec = &data[eocd..];
    let entry_count = read_u16(rec, 10) as usize;
    let cd_offset = read_u32(rec, 16) as usize;
    if entry_count == 0 {
        return Err(ZipError::EmptyArchive);
    }

    let mut entries = Vec::with_capacity(entry_count);
    let mut pos = cd_offset;
    for _ in 0..entry_count {
        let rec = data
            .get(pos..pos + 46)
            .ok_or(ZipError::Truncated("central directory record"))?;
        if read_u32(rec, 0) != CENTRAL_MAGIC {
            return Err(ZipError::NotAZip("bad central directory magic"));
        }
        let method = read_u16(rec, 10);
        let crc32 = read_u32(rec, 16);
        let compressed_size = read_u32(rec, 20) as u64;
        let uncompressed_size = read_u32(rec, 24) as u64;
        let name_len = read_u16(rec, 28) as usize;
        let extra_len = read_u16(rec, 30) as usize;
        let comment_len = read_u16(rec, 32) as usize;
        let local_header_offset = read_u32(rec, 42) as u64;
        let name_bytes = data
            .get(pos + 46..pos + 46 + name_len)
            .ok_or(ZipError::Truncated("entry name"))?;
        let name = String::from_utf8_lossy(name_bytes).into_owned();
        if entries.iter().any(|e: &ZipEntry| e.name == name) {
            return Err(ZipError::DuplicateEntry(name));
        }
        entries.push(ZipEntry {
            name,
            compressed_size,
            uncompressed_size,
            crc32,
            method,
            local_header_offset,
        });
        pos += 46 + name_len + extra_len + comment_len;
    }
    Ok(entries)
}

/// Scan backwards for the EOCD magic; the match nearest the end wins so a
/// comment containing the magic bytes cannot shadow the real record.
fn find_eocd(data: &[u8]) -> Option<usize> {
    let lo = data.len().saturating_sub(EOCD_SEARCH_WINDOW);
    (lo..=data.len() - EOCD_MIN_LEN)
        .rev()
        .find(|&i| read_u32(data, i) == EOCD_MAGIC)
}

fn read_u16(data: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([data[off], data[off + 1]])
}

fn read_u32(data: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([data[off], data[off + 1], data[off + 2], data[off + 3]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{open_raw as open_bytes, write_zip};

    #[test]
    fn enumerates_entries_in_central_directory_order() {
        let zip = write_zip(&[("a.txt", b"aa"), ("dir/b.bin", b"bbb"), ("c", b"")]);
        let container = open_bytes(&zip).unwrap();
        let names: Vec<_> = container.entries().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["a.txt", "dir/b.bin", "c"]);
        assert_eq!(container.entries()[1].uncompressed_size, 3);
        assert_eq!(container.read_entry("dir/b.bin").unwrap(), b"bbb");
    }

    #[test]
    fn empty_file_is_not_a_zip() {
        assert!(matches!(open_bytes(b""), Err(ZipError::NotAZip(_))));
    }

    #[test]
    fn text_file_is_not_a_zip() {
        assert!(matches!(open_bytes(b"hello"), Err(ZipError::NotAZip(_))));
    }

    #[test]
    fn zero_entry_archive_is_rejected() {
        let zip = write_zip(&[]);
        assert!(matches!(open_bytes(&zip), Err(ZipError::EmptyArchive)));
    }

    #[test]
    fn duplicate_entry_names_are_rejected() {
        let zip = write_zip(&[("x", b"1"), ("x", b"2")]);
        assert!(matches!(open_bytes(&zip), Err(ZipError::DuplicateEntry(_))));
    }

    #[test]
    fn missing_entry_read_errors() {
        let zip = write_zip(&[("present", b"1")]);
        let container = open_bytes(&zip).unwrap();
        assert!(matches!(
            container.read_entry("absent"),
            Err(ZipError::MissingEntry(_))
        ));
    }
}
