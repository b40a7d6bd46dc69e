//! Icon rendering. Clone patterns are the pixel-level sources of the four
//! builtin reference hashes; a cloned icon therefore lands at Hamming
//! distance zero from its family and a solid tile lands 32 bits away from
//! every family.

use droidtriage_pipeline::FraudCategory;

use crate::{ForgeError, IconPlan};

const CLONE_SIZE: u32 = 16;

pub(crate) fn render_icon(plan: &IconPlan) -> Result<Option<Vec<u8>>, ForgeError> {
    match plan {
        IconPlan::None => Ok(None),
        IconPlan::Solid { luma, size } => {
            assert!(*size > 0, "solid icon needs a positive size");
            png(*size, |_, _| *luma).map(Some)
        }
        IconPlan::Clone(family) => {
            let family = *family;
            png(CLONE_SIZE, move |x, y| clone_pixel(family, x, y)).map(Some)
        }
    }
}

/// The 16x16 grayscale pattern behind each reference hash: gambling is a
/// dark top half, scam a dark left half, sexual_content two-pixel column
/// stripes, other_fraud a bright top half. Legitimate has no reference
/// pattern and renders as solid gray, which hashes to zero.
fn clone_pixel(family: FraudCategory, x: u32, y: u32) -> u8 {
    let dark = match family {
        FraudCategory::Gambling => y < 8,
        FraudCategory::Scam => x < 8,
        FraudCategory::SexualContent => x % 4 < 2,
        FraudCategory::OtherFraud => y >= 8,
        FraudCategory::Legitimate => return 128,
    };
    if dark {
        0
    } else {
        255
    }
}

fn png(size: u32, pixel: impl Fn(u32, u32) -> u8) -> Result<Vec<u8>, ForgeError> {
    let img = image::GrayImage::from_fn(size, size, |x, y| image::Luma([pixel(x, y)]));
    let mut out = std::io::Cursor::new(Vec::new());
    image::DynamicImage::ImageLuma8(img).write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use droidtriage_apk::average_hash;

    #[test]
    fn clone_patterns_reproduce_the_reference_hashes() {
        let cases = [
            (FraudCategory::Gambling, 0x0000_0000_ffff_ffffu64),
            (FraudCategory::Scam, 0x0f0f_0f0f_0f0f_0f0f),
            (FraudCategory::SexualContent, 0x5555_5555_5555_5555),
            (FraudCategory::OtherFraud, 0xffff_ffff_0000_0000),
        ];
        for (family, expected) in cases {
            let luma: Vec<u8> = (0..16 * 16)
                .map(|i| clone_pixel(family, i % 16, i / 16))
                .collect();
            assert_eq!(average_hash(&luma, 16, 16), expected, "{family}");
        }
    }

    #[test]
    fn solid_tiles_hash_to_zero() {
        for luma in [0u8, 128, 255] {
            let pixels = vec![luma; 48 * 48];
            assert_eq!(average_hash(&pixels, 48, 48), 0);
        }
    }
}
