//! Minimal X.509 emission inside a PKCS#7 SignedData shell, matching what
//! a v1 APK signature entry looks like to a parser that reads identity and
//! validity only. Signature bits are filler.

use chrono::{DateTime, Datelike, Timelike, Utc};

use crate::ForgeError;

const TAG_INTEGER: u8 = 0x02;
const TAG_BIT_STRING: u8 = 0x03;
const TAG_NULL: u8 = 0x05;
const TAG_OID: u8 = 0x06;
const TAG_UTF8_STRING: u8 = 0x0c;
const TAG_UTC_TIME: u8 = 0x17;
const TAG_GENERALIZED_TIME: u8 = 0x18;
const TAG_SEQUENCE: u8 = 0x30;
const TAG_SET: u8 = 0x31;

const OID_CN: &[u8] = &[0x55, 0x04, 0x03];
const OID_SHA256_RSA: &[u8] = &[0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x01, 0x0b];
const OID_PKCS7_DATA: &[u8] = &[0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x07, 0x01];
const OID_PKCS7_SIGNED: &[u8] = &[0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x07, 0x02];

/// Fixed serial; certificate identity in this corpus is carried by the
/// subject, issuer and window, which also determine the fingerprint.
const SERIAL: &[u8] = &[0x1a, 0x2b];

/// Build the `META-INF/CERT.RSA` payload: a PKCS#7 SignedData containing
/// one X.509 v3 certificate with single-CN subject and issuer names.
/// Equal CNs read back as self-signed.
pub fn build_certificate(
    subject_cn: &str,
    issuer_cn: &str,
    not_before: DateTime<Utc>,
    not_after: DateTime<Utc>,
) -> Result<Vec<u8>, ForgeError> {
    if not_before > not_after {
        return Err(ForgeError::InvalidWindow);
    }
    let tbs = seq(&[
        explicit0(&tlv(TAG_INTEGER, &[2])),
        tlv(TAG_INTEGER, SERIAL),
        signature_alg(),
        cn_name(issuer_cn),
        seq(&[time(not_before), time(not_after)]),
        cn_name(subject_cn),
        // SubjectPublicKeyInfo with filler key bits.
        seq(&[signature_alg(), tlv(TAG_BIT_STRING, &[0x00, 0x01, 0x02, 0x03])]),
    ]);
    let certificate = seq(&[tbs, signature_alg(), tlv(TAG_BIT_STRING, &[0x00, 0xaa, 0xbb])]);

    let signed_data = seq(&[
        tlv(TAG_INTEGER, &[1]),
        tlv(TAG_SET, &[]),
        seq(&[tlv(TAG_OID, OID_PKCS7_DATA)]),
        explicit0(&certificate),
        tlv(TAG_SET, &[]),
    ]);
    Ok(seq(&[tlv(TAG_OID, OID_PKCS7_SIGNED), explicit0(&signed_data)]))
}

fn tlv(tag: u8, content: &[u8]) -> Vec<u8> {
    let mut out = vec![tag];
    match content.len() {
        n if n < 0x80 => out.push(n as u8),
        n if n <= 0xff => {
            out.push(0x81);
            out.push(n as u8);
        }
        n if n <= 0xffff => {
            out.push(0x82);
            out.extend_from_slice(&(n as u16).to_be_bytes());
        }
        n => {
            out.push(0x83);
            out.push((n >> 16) as u8);
            out.extend_from_slice(&(n as u16).to_be_bytes());
        }
    }
    out.extend_from_slice(content);
    out
}

fn seq(parts: &[Vec<u8>]) -> Vec<u8> {
    tlv(TAG_SEQUENCE, &parts.concat())
}

fn explicit0(inner: &[u8]) -> Vec<u8> {
    tlv(0xa0, inner)
}

fn signature_alg() -> Vec<u8> {
    seq(&[tlv(TAG_OID, OID_SHA256_RSA), tlv(TAG_NULL, &[])])
}

/// Name ::= SEQUENCE of one SET of one (CN, value) pair, value as
/// UTF8String so any text survives the round trip.
fn cn_name(cn: &str) -> Vec<u8> {
    seq(&[tlv(
        TAG_SET,
        &seq(&[tlv(TAG_OID, OID_CN), tlv(TAG_UTF8_STRING, cn.as_bytes())]),
    )])
}

/// UTCTime for years the two-digit pivot can express, GeneralizedTime
/// otherwise. Whole seconds only.
fn time(at: DateTime<Utc>) -> Vec<u8> {
    let (tag, text) = if (1950..=2049).contains(&at.year()) {
        (
            TAG_UTC_TIME,
            format!(
                "{:02}{:02}{:02}{:02}{:02}{:02}Z",
                at.year() % 100,
                at.month(),
                at.day(),
                at.hour(),
                at.minute(),
                at.second()
            ),
        )
    } else {
        (
            TAG_GENERALIZED_TIME,
            format!(
                "{:04}{:02}{:02}{:02}{:02}{:02}Z",
                at.year(),
                at.month(),
                at.day(),
                at.hour(),
                at.minute(),
                at.second()
            ),
        )
    };
    tlv(tag, text.as_bytes())
}
