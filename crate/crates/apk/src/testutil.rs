//! Shared unit-test helpers: hand-rolled ZIP, AXML, DEX, and DER emitters
//! written straight from the published formats, independent of the fixture
//! forge crate.

use std::io::Write;

use crate::zip::{open_apk, ApkContainer, ZipError};

pub fn write_zip(entries: &[(&str, &[u8])]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut central = Vec::new();
    for (name, body) in entries {
        let offset = out.len() as u32;
        let crc = crc32fast::hash(body);
        out.extend_from_slice(&0x0403_4b50u32.to_le_bytes());
        out.extend_from_slice(&[20, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        out.extend_from_slice(&crc.to_le_bytes());
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(body);

        central.extend_from_slice(&0x0201_4b50u32.to_le_bytes());
        central.extend_from_slice(&[20, 0, 20, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        central.extend_from_slice(&crc.to_le_bytes());
        central.extend_from_slice(&(body.len() as u32).to_le_bytes());
        central.extend_from_slice(&(body.len() as u32).to_le_bytes());
        central.extend_from_slice(&(name.len() as u16).to_le_bytes());
        central.extend_from_slice(&[0u8; 12]);
        central.extend_from_slice(&offset.to_le_bytes());
        central.extend_from_slice(name.as_bytes());
    }
    let cd_offset = out.len() as u32;
    let cd_size = central.len() as u32;
    out.extend_from_slice(&central);
    out.extend_from_slice(&0x0605_4b50u32.to_le_bytes());
    out.extend_from_slice(&[0, 0, 0, 0]);
    out.extend_from_slice(&(entries.len() as u16).to_le_bytes());
    out.extend_from_slice(&(entries.len() as u16).to_le_bytes());
    out.extend_from_slice(&cd_size.to_le_bytes());
    out.extend_from_slice(&cd_offset.to_le_bytes());
    out.extend_from_slice(&[0, 0]);
    out
}

/// Write raw bytes to a temp file and open them as an APK. The whole file
/// is read eagerly, so the temp file may vanish afterwards.
pub fn open_raw(bytes: &[u8]) -> Result<ApkContainer, ZipError> {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(bytes).unwrap();
    open_apk(f.path())
}

/// Assemble a stored-entry ZIP from `entries` and open it.
pub fn open_zip(entries: &[(&str, &[u8])]) -> ApkContainer {
    open_raw(&write_zip(entries)).unwrap()
}

/// Minimal DEX emitter: header carries only the magic and string_ids
/// fields; strings are raw MUTF-8 payloads without the NUL terminator.
pub fn build_dex(strings: &[&[u8]]) -> Vec<u8> {
    const HEADER_LEN: usize = 112;
    let mut out = vec![0u8; HEADER_LEN];
    out[..8].copy_from_slice(b"dex\n035\0");
    let ids_off = out.len();
    out.resize(ids_off + 4 * strings.len(), 0);
    for (i, payload) in strings.iter().enumerate() {
        let data_off = out.len() as u32;
        out[ids_off + 4 * i..ids_off + 4 * i + 4].copy_from_slice(&data_off.to_le_bytes());
        assert!(payload.len() < 128, "test strings stay single-byte uleb128");
        out.push(payload.len() as u8);
        out.extend_from_slice(payload);
        out.push(0);
    }
    out[56..60].copy_from_slice(&(strings.len() as u32).to_le_bytes());
    out[60..64].copy_from_slice(&(ids_off as u32).to_le_bytes());
    out
}

/// Grayscale square PNG rendered from a pixel function.
pub fn png_bytes(pixels: impl Fn(u32, u32) -> u8, size: u32) -> Vec<u8> {
    let img = image::GrayImage::from_fn(size, size, |x, y| image::Luma([pixels(x, y)]));
    let mut out = std::io::Cursor::new(Vec::new());
    image::DynamicImage::ImageLuma8(img)
        .write_to(&mut out, image::ImageFormat::Png)
        .unwrap();
    out.into_inner()
}

/// AXML chunk emitters.
pub mod axml {
    pub const NO_NS: u32 = 0xffff_ffff;

    pub fn utf8_pool(strings: &[&str]) -> Vec<u8> {
        let mut offsets = Vec::new();
        let mut data = Vec::new();
        for s in strings {
            offsets.push(data.len() as u32);
            data.push(s.encode_utf16().count() as u8);
            data.push(s.len() as u8);
            data.extend_from_slice(s.as_bytes());
            data.push(0);
        }
        while data.len() % 4 != 0 {
            data.push(0);
        }
        pool_chunk(strings.len(), 1 << 8, &offsets, &data)
    }

    pub fn utf16_pool(strings: &[&str]) -> Vec<u8> {
        let mut offsets = Vec::new();
        let mut data = Vec::new();
        for s in strings {
            offsets.push(data.len() as u32);
            let units: Vec<u16> = s.encode_utf16().collect();
            data.extend_from_slice(&(units.len() as u16).to_le_bytes());
            for u in units {
                data.extend_from_slice(&u.to_le_bytes());
            }
            data.extend_from_slice(&0u16.to_le_bytes());
        }
        pool_chunk(strings.len(), 0, &offsets, &data)
    }

    fn pool_chunk(count: usize, flags: u32, offsets: &[u32], data: &[u8]) -> Vec<u8> {
        let strings_start = 28 + 4 * count as u32;
        let size = strings_start + data.len() as u32;
        let mut out = Vec::new();
        out.extend_from_slice(&0x0001u16.to_le_bytes());
        out.extend_from_slice(&28u16.to_le_bytes());
        out.extend_from_slice(&size.to_le_bytes());
        out.extend_from_slice(&(count as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&flags.to_le_bytes());
        out.extend_from_slice(&strings_start.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for o in offsets {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(data);
        out
    }

    pub struct Attr {
        pub ns: u32,
        pub name: u32,
        pub raw: u32,
        pub dtype: u8,
        pub data: u32,
    }

    pub fn str_attr(ns: u32, name: u32, value: u32) -> Attr {
        Attr { ns, name, raw: value, dtype: 0x03, data: value }
    }

    pub fn int_attr(ns: u32, name: u32, value: u32) -> Attr {
        Attr { ns, name, raw: NO_NS, dtype: 0x10, data: value }
    }

    pub fn ref_attr(ns: u32, name: u32, value: u32) -> Attr {
        Attr { ns, name, raw: NO_NS, dtype: 0x01, data: value }
    }

    pub fn start(name: u32, attrs: &[Attr]) -> Vec<u8> {
        let size = 16 + 20 + attrs.len() * 20;
        let mut out = Vec::new();
        out.extend_from_slice(&0x0102u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(&(size as u32).to_le_bytes());
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&NO_NS.to_le_bytes());
        out.extend_from_slice(&NO_NS.to_le_bytes());
        out.extend_from_slice(&name.to_le_bytes());
        out.extend_from_slice(&20u16.to_le_bytes());
        out.extend_from_slice(&20u16.to_le_bytes());
        out.extend_from_slice(&(attrs.len() as u16).to_le_bytes());
        out.extend_from_slice(&[0u8; 6]);
        for a in attrs {
            out.extend_from_slice(&a.ns.to_le_bytes());
            out.extend_from_slice(&a.name.to_le_bytes());
            out.extend_from_slice(&a.raw.to_le_bytes());
            out.extend_from_slice(&8u16.to_le_bytes());
            out.push(0);
            out.push(a.dtype);
            out.extend_from_slice(&a.data.to_le_bytes());
        }
        out
    }

    pub fn end(name: u32) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&0x0103u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(&24u32.to_le_bytes());
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&NO_NS.to_le_bytes());
        out.extend_from_slice(&NO_NS.to_le_bytes());
        out.extend_from_slice(&name.to_le_bytes());
        out
    }

    pub fn doc(chunks: &[Vec<u8>]) -> Vec<u8> {
        let total = 8 + chunks.iter().map(Vec::len).sum::<usize>();
        let mut out = Vec::new();
        out.extend_from_slice(&0x0003u16.to_le_bytes());
        out.extend_from_slice(&8u16.to_le_bytes());
        out.extend_from_slice(&(total as u32).to_le_bytes());
        for c in chunks {
            out.extend_from_slice(c);
        }
        out
    }
}

/// DER TLV emitters.
pub mod der {
    pub fn tlv(tag: u8, content: &[u8]) -> Vec<u8> {
        let mut out = vec![tag];
        match content.len() {
            n if n < 0x80 => out.push(n as u8),
            n if n <= 0xff => {
                out.push(0x81);
                out.push(n as u8);
            }
            n => {
                out.push(0x82);
                out.extend_from_slice(&(n as u16).to_be_bytes());
            }
        }
        out.extend_from_slice(content);
        out
    }

    pub fn join(parts: &[Vec<u8>]) -> Vec<u8> {
        parts.concat()
    }

    pub fn seq(parts: &[Vec<u8>]) -> Vec<u8> {
        tlv(0x30, &join(parts))
    }

    pub fn set(parts: &[Vec<u8>]) -> Vec<u8> {
        tlv(0x31, &join(parts))
    }

    pub fn ctx(n: u8, parts: &[Vec<u8>]) -> Vec<u8> {
        tlv(0xa0 | n, &join(parts))
    }

    pub fn name(parts: &[(&[u8], &str)]) -> Vec<u8> {
        let rdns: Vec<Vec<u8>> = parts
            .iter()
            .map(|(oid, value)| set(&[seq(&[tlv(0x06, oid), tlv(0x13, value.as_bytes())])]))
            .collect();
        seq(&rdns)
    }

    pub fn utctime(s: &str) -> Vec<u8> {
        tlv(0x17, s.as_bytes())
    }

    pub fn gentime(s: &str) -> Vec<u8> {
        tlv(0x18, s.as_bytes())
    }

    pub fn alg() -> Vec<u8> {
        // sha256WithRSAEncryption + NULL params.
        seq(&[
            tlv(0x06, &[0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x01, 0x0b]),
            tlv(0x05, &[]),
        ])
    }

    pub fn certificate(
        serial: &[u8],
        issuer: Vec<u8>,
        subject: Vec<u8>,
        not_before: Vec<u8>,
        not_after: Vec<u8>,
    ) -> Vec<u8> {
        let tbs = seq(&[
            ctx(0, &[tlv(0x02, &[2])]),
            tlv(0x02, serial),
            alg(),
            issuer,
            seq(&[not_before, not_after]),
            subject,
            seq(&[alg(), tlv(0x03, &[0x00, 0x01, 0x02, 0x03])]),
        ]);
        seq(&[tbs, alg(), tlv(0x03, &[0x00, 0xaa, 0xbb])])
    }

    /// PKCS#7 SignedData shell around one certificate.
    pub fn pkcs7(cert: Vec<u8>) -> Vec<u8> {
        let signed_data = seq(&[
            tlv(0x02, &[1]),
            set(&[]),
            seq(&[tlv(0x06, &[0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x07, 0x01])]),
            ctx(0, &[cert]),
            set(&[]),
        ]);
        seq(&[
            tlv(0x06, &[0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x07, 0x02]),
            ctx(0, &[signed_data]),
        ])
    }
}
