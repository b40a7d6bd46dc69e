//! DEX emission: a 112-byte header plus the string_ids and string_data
//! sections. Checksum and signature fields stay zeroed; the extractor
//! skips verification by design, so honest values would buy nothing.

const HEADER_LEN: usize = 112;
const ENDIAN_TAG: u32 = 0x1234_5678;

/// Encode `strings` as a minimal valid DEX whose string pool lists them in
/// order. Lengths are recorded as UTF-16 unit counts per the format even
/// though the read side trusts the NUL terminator instead.
pub fn build_dex(strings: &[String]) -> Vec<u8> {
    let mut out = vec![0u8; HEADER_LEN];
    out[..8].copy_from_slice(b"dex\n035\0");

    let ids_off = out.len();
    out.resize(ids_off + 4 * strings.len(), 0);
    for (i, s) in strings.iter().enumerate() {
        let data_off = out.len() as u32;
        out[ids_off + 4 * i..ids_off + 4 * i + 4].copy_from_slice(&data_off.to_le_bytes());
        write_uleb128(&mut out, s.encode_utf16().count() as u32);
        write_mutf8(&mut out, s);
        out.push(0);
    }

    let file_size = out.len() as u32;
    out[32..36].copy_from_slice(&file_size.to_le_bytes());
    out[36..40].copy_from_slice(&(HEADER_LEN as u32).to_le_bytes());
    out[40..44].copy_from_slice(&ENDIAN_TAG.to_le_bytes());
    out[56..60].copy_from_slice(&(strings.len() as u32).to_le_bytes());
    out[60..64].copy_from_slice(&(ids_off as u32).to_le_bytes());
    out
}

fn write_uleb128(out: &mut Vec<u8>, mut value: u32) {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

/// Modified UTF-8: NUL becomes the two-byte `C0 80` form so it never
/// collides with the terminator, and supplementary characters are written
/// as CESU-8 surrogate pairs.
fn write_mutf8(out: &mut Vec<u8>, s: &str) {
    let mut pair = [0u16; 2];
    for c in s.chars() {
        if c == '\0' {
            out.extend_from_slice(&[0xc0, 0x80]);
        } else if (c as u32) < 0x10000 {
            let mut buf = [0u8; 3];
            out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
        } else {
            for &unit in c.encode_utf16(&mut pair).iter() {
                out.push(0xe0 | (unit >> 12) as u8);
                out.push(0x80 | ((unit >> 6) & 0x3f) as u8);
                out.push(0x80 | (unit & 0x3f) as u8);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_carries_magic_and_string_table_fields() {
        let dex = build_dex(&["a".into(), "b".into()]);
        assert_eq!(&dex[..8], b"dex\n035\0");
        assert_eq!(u32::from_le_bytes(dex[56..60].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(dex[60..64].try_into().unwrap()), 112);
        assert_eq!(u32::from_le_bytes(dex[32..36].try_into().unwrap()), dex.len() as u32);
    }

    #[test]
    fn empty_pool_is_a_valid_dex() {
        let dex = build_dex(&[]);
        assert_eq!(dex.len(), HEADER_LEN);
        assert_eq!(u32::from_le_bytes(dex[56..60].try_into().unwrap()), 0);
    }

    #[test]
    fn nul_uses_the_two_byte_form() {
        let mut out = Vec::new();
        write_mutf8(&mut out, "a\0b");
        assert_eq!(out, [b'a', 0xc0, 0x80, b'b']);
    }

    #[test]
    fn supplementary_characters_become_surrogate_triples() {
        let mut out = Vec::new();
        write_mutf8(&mut out, "\u{1f600}");
        // U+1F600 is the surrogate pair D83D DE00.
        assert_eq!(out, [0xed, 0xa0, 0xbd, 0xed, 0xb8, 0x80]);
    }

    #[test]
    fn uleb128_splits_at_seven_bits() {
        let mut out = Vec::new();
        write_uleb128(&mut out, 0x7f);
        write_uleb128(&mut out, 0x80);
        assert_eq!(out, [0x7f, 0x80, 0x01]);
    }
}
