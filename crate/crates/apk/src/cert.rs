//! v1 signing-certificate extraction.
//!
//! A minimal DER walker, not a PKCS#7 validator: it finds the first embedded
//! X.509 certificate inside `META-INF/*.{RSA,DSA,EC}` and lifts identity and
//! validity facts from it. Signatures are never verified; downstream risk
//! rules need who signed and when, not cryptographic proof.

use chrono::{DateTime, NaiveDate, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::zip::{ApkContainer, ZipError};

const TAG_INTEGER: u8 = 0x02;
const TAG_OID: u8 = 0x06;
const TAG_UTF8_STRING: u8 = 0x0c;
const TAG_PRINTABLE_STRING: u8 = 0x13;
const TAG_T61_STRING: u8 = 0x14;
const TAG_IA5_STRING: u8 = 0x16;
const TAG_UTC_TIME: u8 = 0x17;
const TAG_GENERALIZED_TIME: u8 = 0x18;
const TAG_SEQUENCE: u8 = 0x30;
const TAG_SET: u8 = 0x31;
const TAG_CONSTRUCTED: u8 = 0x20;

const OID_CN: &[u8] = &[0x55, 0x04, 0x03];
const OID_O: &[u8] = &[0x55, 0x04, 0x0a];
const OID_OU: &[u8] = &[0x55, 0x04, 0x0b];

/// Crafted inputs can nest TLVs almost arbitrarily deep; cap the walk.
const MAX_DEPTH: usize = 64;

#[derive(Debug, Error)]
pub enum DerError {
    #[error("malformed der: {0}")]
    MalformedDer(&'static str),
    #[error(transparent)]
    Container(#[from] ZipError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CertificateInfo {
    pub subject_dn: String,
    pub issuer_dn: String,
    pub serial_hex: String,
    pub not_before: DateTime<Utc>,
    pub not_after: DateTime<Utc>,
    pub sha256_fingerprint: String,
    pub self_signed: bool,
}

/// Parse the first v1 signature entry. Absence of a signature entry is a
/// fact about the APK, not an error.
pub fn parse_certificate(container: &ApkContainer) -> Result<Option<CertificateInfo>, DerError> {
    let Some(first) = container
        .entries()
        .iter()
        .map(|e| e.name.as_str())
        .filter(|n| is_signature_entry(n))
        .min()
    else {
        return Ok(None);
    };
    let bytes = container.read_entry(first)?;
    let info = find_certificate(&bytes, 0)?
        .ok_or(DerError::MalformedDer("no embedded certificate"))?;
    Ok(Some(info))
}

fn is_signature_entry(name: &str) -> bool {
    let Some(rest) = name.strip_prefix("META-INF/") else {
        return false;
    };
    if rest.contains('/') {
        return false;
    }
    let upper = rest.to_ascii_uppercase();
    upper.ends_with(".RSA") || upper.ends_with(".DSA") || upper.ends_with(".EC")
}

/// One decoded TLV. `raw` spans the whole tag-length-value encoding so the
/// fingerprint can cover exactly the certificate bytes.
#[derive(Clone, Copy)]
struct Node<'a> {
    tag: u8,
    content: &'a [u8],
    raw: &'a [u8],
}

impl<'a> Node<'a> {
    fn is_constructed(&self) -> bool {
        self.tag & TAG_CONSTRUCTED != 0
    }

    fn children(&self) -> Result<Vec<Node<'a>>, DerError> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < self.content.len() {
            let (node, next) = read_node(self.content, pos)?;
            out.push(node);
            pos = next;
        }
        Ok(out)
    }
}

fn read_node(data: &[u8], at: usize) -> Result<(Node<'_>, usize), DerError> {
    let err = DerError::MalformedDer("truncated tlv");
    let tag = *data.get(at).ok_or(err)?;
    if tag & 0x1f == 0x1f {
        return Err(DerError::MalformedDer("multi-byte tags are not used in certificates"));
    }
    let first_len = *data.get(at + 1).ok_or(DerError::MalformedDer("truncated tlv"))?;
    let (len, header) = if first_len < 0x80 {
        (first_len as usize, 2)
    } else {
        let n = (first_len & 0x7f) as usize;
        if n == 0 || n > 4 {
            return Err(DerError::MalformedDer("indefinite or oversized length"));
        }
        let len_bytes = data
            .get(at + 2..at + 2 + n)
            .ok_or(DerError::MalformedDer("truncated length"))?;
        let mut len = 0usize;
        for &b in len_bytes {
            len = len << 8 | b as usize;
        }
        (len, 2 + n)
    };
    let start = at + header;
    let end = start
        .checked_add(len)
        .ok_or(DerError::MalformedDer("length overflow"))?;
    let content = data
        .get(start..end)
        .ok_or(DerError::MalformedDer("content past end of input"))?;
    Ok((
        Node {
            tag,
            content,
            raw: &data[at..end],
        },
        end,
    ))
}

/// Depth-first search for the first node that parses as an X.509 certificate.
fn find_certificate(data: &[u8], depth: usize) -> Result<Option<CertificateInfo>, DerError> {
    if depth >= MAX_DEPTH {
        return Ok(None);
    }
    let mut pos = 0;
    let mut found = None;
    while pos < data.len() {
        // At the top level a broken TLV is fatal; below, the error already
        // surfaced when the parent sliced its children.
        let (node, next) = read_node(data, pos)?;
        if node.tag == TAG_SEQUENCE {
            if let Some(info) = parse_cert_node(&node) {
                found = Some(info);
                break;
            }
        }
        if node.is_constructed() {
            if let Some(info) = find_certificate(node.content, depth + 1).unwrap_or(None) {
                found = Some(info);
                break;
            }
        }
        pos = next;
    }
    Ok(found)
}

/// Try to read `node` as Certificate ::= SEQUENCE { tbs, sigAlg, sigValue }.
/// Returns None when the shape does not match, so the search can continue.
fn parse_cert_node(node: &Node<'_>) -> Option<CertificateInfo> {
    let children = node.children().ok()?;
    if children.len() != 3 || children[0].tag != TAG_SEQUENCE {
        return None;
    }
    let tbs = children[0].children().ok()?;
    let mut fields = tbs.iter().peekable();
    // version [0] EXPLICIT is optional.
    if fields.peek().map(|n| n.tag) == Some(0xa0) {
        fields.next();
    }
    let serial = fields.next().filter(|n| n.tag == TAG_INTEGER)?;
    let _sig_alg = fields.next().filter(|n| n.tag == TAG_SEQUENCE)?;
    let issuer = fields.next().filter(|n| n.tag == TAG_SEQUENCE)?;
    let validity = fields.next().filter(|n| n.tag == TAG_SEQUENCE)?;
    let subject = fields.next().filter(|n| n.tag == TAG_SEQUENCE)?;

    let times = validity.children().ok()?;
    if times.len() != 2 {
        return None;
    }
    let not_before = parse_time(&times[0])?;
    let not_after = parse_time(&times[1])?;
    if not_before > not_after {
        return None;
    }
    let subject_dn = parse_name(&subject)?;
    let issuer_dn = parse_name(&issuer)?;
    let self_signed = subject_dn == issuer_dn;
    Some(CertificateInfo {
        self_signed,
        subject_dn,
        issuer_dn,
        serial_hex: serial_to_hex(serial.content),
        not_before,
        not_after,
        sha256_fingerprint: hex(&Sha256::digest(node.raw)),
    })
}

/// Name ::= SEQUENCE OF SET OF SEQUENCE { oid, value }; only CN/O/OU are
/// rendered, in encoding order, joined with ", ".
fn parse_name(node: &Node<'_>) -> Option<String> {
    let mut parts = Vec::new();
    for rdn in node.children().ok()? {
        if rdn.tag != TAG_SET {
            return None;
        }
        for atv in rdn.children().ok()? {
            if atv.tag != TAG_SEQUENCE {
                return None;
            }
            let kv = atv.children().ok()?;
            if kv.len() != 2 || kv[0].tag != TAG_OID {
                return None;
            }
            let key = match kv[0].content {
                OID_CN => "CN",
                OID_O => "O",
                OID_OU => "OU",
                _ => continue,
            };
            let value = match kv[1].tag {
                TAG_UTF8_STRING | TAG_PRINTABLE_STRING | TAG_IA5_STRING | TAG_T61_STRING => {
                    String::from_utf8_lossy(kv[1].content).into_owned()
                }
                _ => return None,
            };
            parts.push(format!("{key}={value}"));
        }
    }
    Some(parts.join(", "))
}

fn parse_time(node: &Node<'_>) -> Option<DateTime<Utc>> {
    let text = std::str::from_utf8(node.content).ok()?;
    let (year, rest) = match node.tag {
        TAG_UTC_TIME => {
            // YYMMDDHHMMSSZ with the 1950/2049 pivot.
            if text.len() != 13 || !text.ends_with('Z') {
                return None;
            }
            let yy: i32 = text[..2].parse().ok()?;
            (if yy < 50 { 2000 + yy } else { 1900 + yy }, &text[2..12])
        }
        TAG_GENERALIZED_TIME => {
            // YYYYMMDDHHMMSSZ.
            if text.len() != 15 || !text.ends_with('Z') {
                return None;
            }
            (text[..4].parse().ok()?, &text[4..14])
        }
        _ => return None,
    };
    let month: u32 = rest[..2].parse().ok()?;
    let day: u32 = rest[2..4].parse().ok()?;
    let hour: u32 = rest[4..6].parse().ok()?;
    let minute: u32 = rest[6..8].parse().ok()?;
    let second: u32 = rest[8..10].parse().ok()?;
    NaiveDate::from_ymd_opt(year, month, day)?
        .and_hms_opt(hour, minute, second)
        .map(|dt| dt.and_utc())
}

/// Strip the canonical sign-pad byte so the hex matches the planted value.
fn serial_to_hex(content: &[u8]) -> String {
    let trimmed = match content {
        [0x00, rest @ ..] if !rest.is_empty() && rest[0] & 0x80 != 0 => rest,
        other => other,
    };
    hex(trimmed)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{der, open_zip};

    fn self_signed_test_cert() -> Vec<u8> {
        let who = || der::name(&[(OID_CN, "Test")]);
        der::pkcs7(der::certificate(
            &[0x1a, 0x2b],
            who(),
            who(),
            der::utctime("200101000000Z"),
            der::utctime("300101000000Z"),
        ))
    }

    #[test]
    fn parses_a_self_signed_certificate() {
        let container = open_zip(&[("META-INF/CERT.RSA", &self_signed_test_cert())]);
        let info = parse_certificate(&container).unwrap().unwrap();
        assert!(info.self_signed);
        assert!(info.subject_dn.contains("CN=Test"));
        assert_eq!(info.subject_dn, info.issuer_dn);
        assert_eq!(info.serial_hex, "1a2b");
        assert_eq!(info.sha256_fingerprint.len(), 64);
        assert!(info.sha256_fingerprint.bytes().all(|b| b.is_ascii_hexdigit()));
        assert_eq!(info.not_before.to_rfc3339(), "2020-01-01T00:00:00+00:00");
        assert_eq!(info.not_after.to_rfc3339(), "2030-01-01T00:00:00+00:00");
    }

    #[test]
    fn no_signature_entry_is_absent_not_error() {
        let container = open_zip(&[("classes.dex", b"x"), ("META-INF/MANIFEST.MF", b"y")]);
        assert!(parse_certificate(&container).unwrap().is_none());
    }

    #[test]
    fn random_bytes_are_malformed() {
        let container = open_zip(&[("META-INF/CERT.RSA", &[0x9e, 0x13, 0x77, 0x41, 0x00, 0xfe])]);
        assert!(matches!(
            parse_certificate(&container),
            Err(DerError::MalformedDer(_))
        ));
    }

    #[test]
    fn ca_signed_certificate_is_not_self_signed() {
        let cert = der::pkcs7(der::certificate(
            &[0x05],
            der::name(&[(OID_CN, "Example CA"), (OID_O, "Example Org")]),
            der::name(&[(OID_CN, "app"), (OID_OU, "Mobile")]),
            der::utctime("220501120000Z"),
            der::utctime("270501120000Z"),
        ));
        let container = open_zip(&[("META-INF/SIGNER.DSA", &cert)]);
        let info = parse_certificate(&container).unwrap().unwrap();
        assert!(!info.self_signed);
        assert_eq!(info.subject_dn, "CN=app, OU=Mobile");
        assert_eq!(info.issuer_dn, "CN=Example CA, O=Example Org");
    }

    #[test]
    fn generalized_time_is_supported() {
        let who = || der::name(&[(OID_CN, "Long")]);
        let cert = der::pkcs7(der::certificate(
            &[0x01],
            who(),
            who(),
            der::gentime("19990203040506Z"),
            der::gentime("20550203040506Z"),
        ));
        let container = open_zip(&[("META-INF/CERT.EC", &cert)]);
        let info = parse_certificate(&container).unwrap().unwrap();
        assert_eq!(info.not_before.to_rfc3339(), "1999-02-03T04:05:06+00:00");
        assert_eq!(info.not_after.to_rfc3339(), "2055-02-03T04:05:06+00:00");
    }

    #[test]
    fn utctime_year_pivot() {
        let who = || der::name(&[(OID_CN, "Pivot")]);
        let cert = der::pkcs7(der::certificate(
            &[0x01],
            who(),
            who(),
            der::utctime("500101000000Z"),
            der::utctime("490101000000Z"),
        ));
        let container = open_zip(&[("META-INF/CERT.RSA", &cert)]);
        let info = parse_certificate(&container).unwrap().unwrap();
        assert_eq!(info.not_before.to_rfc3339(), "1950-01-01T00:00:00+00:00");
        assert_eq!(info.not_after.to_rfc3339(), "2049-01-01T00:00:00+00:00");
    }

    #[test]
    fn sign_padded_serial_trims_to_planted_bytes() {
        let who = || der::name(&[(OID_CN, "Pad")]);
        let cert = der::pkcs7(der::certificate(
            &[0x00, 0x80, 0x01],
            who(),
            who(),
            der::utctime("200101000000Z"),
            der::utctime("300101000000Z"),
        ));
        let container = open_zip(&[("META-INF/CERT.RSA", &cert)]);
        let info = parse_certificate(&container).unwrap().unwrap();
        assert_eq!(info.serial_hex, "8001");
    }

    #[test]
    fn first_signature_entry_by_name_wins() {
        let a = self_signed_test_cert();
        let other = der::pkcs7(der::certificate(
            &[0x99],
            der::name(&[(OID_CN, "Zed")]),
            der::name(&[(OID_CN, "Zed")]),
            der::utctime("200101000000Z"),
            der::utctime("300101000000Z"),
        ));
        let container = open_zip(&[("META-INF/ZZZ.RSA", &other), ("META-INF/AAA.RSA", &a)]);
        let info = parse_certificate(&container).unwrap().unwrap();
        assert!(info.subject_dn.contains("CN=Test"));
    }
}
