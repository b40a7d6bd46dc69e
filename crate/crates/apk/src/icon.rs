//! Launcher-icon extraction and perceptual hashing.
//!
//! Resource-table resolution is out of scope, so the icon reference is
//! resolved by path convention: raster entries under `res/mipmap-*/` beat
//! `res/drawable-*/`, higher density beats lower. The 8x8 average hash is
//! computed in pure integer arithmetic so recomputation is bit-stable and
//! uniform brightness shifts provably cannot flip a bit.

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::axml::ManifestInfo;
use crate::zip::{ApkContainer, ZipError};

#[derive(Debug, Error)]
pub enum IconError {
    #[error("failed to decode icon entry `{name}`")]
    DecodeError {
        name: String,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Container(#[from] ZipError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IconFormat {
    Png,
    Webp,
    Jpeg,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IconAsset {
    #[serde(skip)]
    pub raw_bytes: Vec<u8>,
    pub width: u32,
    pub height: u32,
    pub format: IconFormat,
    #[serde(serialize_with = "hex_u64")]
    pub ahash64: u64,
}

fn hex_u64<S: Serializer>(value: &u64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{value:016x}"))
}

/// Pick and decode the launcher icon. Absence (no reference, no matching
/// entry, or a non-raster asset such as adaptive-icon XML) is a fact, not an
/// error; only corrupt pixel data in a chosen raster entry fails.
pub fn extract_icon(
    container: &ApkContainer,
    manifest: &ManifestInfo,
) -> Result<Option<IconAsset>, IconError> {
    if manifest.icon_ref.is_none() {
        return Ok(None);
    }
    let Some(name) = container
        .entries()
        .iter()
        .filter_map(|e| candidate_rank(&e.name).map(|rank| (rank, &e.name)))
        .max_by_key(|(rank, name)| (*rank, std::cmp::Reverse(name.as_str())))
        .map(|(_, name)| name.clone())
    else {
        return Ok(None);
    };
    let raw_bytes = container.read_entry(&name)?;
    let format = detect_format(&raw_bytes);
    let image_format = match format {
        IconFormat::Png => image::ImageFormat::Png,
        IconFormat::Webp => image::ImageFormat::WebP,
        IconFormat::Jpeg => image::ImageFormat::Jpeg,
        IconFormat::Unknown => return Ok(None),
    };
    let decoded = image::load_from_memory_with_format(&raw_bytes, image_format)
        .map_err(|source| IconError::DecodeError { name, source })?;
    let luma = decoded.to_luma8();
    let ahash64 = average_hash(luma.as_raw(), luma.width(), luma.height());
    Ok(Some(IconAsset {
        raw_bytes,
        width: decoded.width(),
        height: decoded.height(),
        format,
        ahash64,
    }))
}

/// (is_mipmap, density) ordering key; `None` for entries that cannot be the
/// launcher icon.
fn candidate_rank(name: &str) -> Option<(bool, u32)> {
    let rest = name.strip_prefix("res/")?;
    let (dir, file) = rest.split_once('/')?;
    if file.contains('/') {
        return None;
    }
    let ext = file.rsplit_once('.')?.1.to_ascii_lowercase();
    if !matches!(ext.as_str(), "png" | "webp" | "jpg" | "jpeg") {
        return None;
    }
    let mut qualifiers = dir.split('-');
    let kind = qualifiers.next()?;
    let is_mipmap = match kind {
        "mipmap" => true,
        "drawable" => false,
        _ => return None,
    };
    let density = qualifiers
        .find_map(|q| match q {
            "ldpi" => Some(120),
            "mdpi" => Some(160),
            "tvdpi" => Some(213),
            "hdpi" => Some(240),
            "xhdpi" => Some(320),
            "xxhdpi" => Some(480),
            "xxxhdpi" => Some(640),
            _ => None,
        })
        .unwrap_or(160);
    Some((is_mipmap, density))
}

fn detect_format(bytes: &[u8]) -> IconFormat {
    if bytes.starts_with(&[0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a]) {
        IconFormat::Png
    } else if bytes.starts_with(&[0xff, 0xd8, 0xff]) {
        IconFormat::Jpeg
    } else if bytes.len() >= 12 && &bytes[..4] == b"RIFF" && &bytes[8..12] == b"WEBP" {
        IconFormat::Webp
    } else {
        IconFormat::Unknown
    }
}

/// 8x8 average hash over grayscale pixels, row-major bit order with pixel
/// block (0,0) at bit 63. The image is partitioned into an 8x8 grid; each
/// block value is its mean luma in 1/4096 fixed point, and a bit is set when
/// the block value strictly exceeds the mean of all 64 block values.
///
/// Integer-exactness argument: a uniform shift of every pixel by `c` adds
/// exactly `4096*c` to every block value (the added term is divisible by the
/// block pixel count), which adds the same constant to both sides of the
/// threshold comparison. Panics if `luma.len() != width * height` or the
/// image is empty.
pub fn average_hash(luma: &[u8], width: u32, height: u32) -> u64 {
    let (w, h) = (width as usize, height as usize);
    assert!(w > 0 && h > 0, "average_hash needs a non-empty image");
    assert_eq!(luma.len(), w * h, "luma buffer does not match dimensions");

    let mut values = [0u64; 64];
    for by in 0..8 {
        for bx in 0..8 {
            let x0 = bx * w / 8;
            let x1 = ((bx + 1) * w / 8).max(x0 + 1);
            let y0 = by * h / 8;
            let y1 = ((by + 1) * h / 8).max(y0 + 1);
            let mut sum = 0u64;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += luma[y * w + x] as u64;
                }
            }
            let count = ((x1 - x0) * (y1 - y0)) as u64;
            values[by * 8 + bx] = sum * 4096 / count;
        }
    }
    let total: u64 = values.iter().sum();
    let mut hash = 0u64;
    for (i, &v) in values.iter().enumerate() {
        if v * 64 > total {
            hash |= 1 << (63 - i);
        }
    }
    hash
}
