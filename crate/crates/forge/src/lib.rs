//! Synthetic APK construction with precisely controlled fraud indicators.
//!
//! Every emitter here is the write-side inverse of one extractor: the AXML
//! builder inverts the manifest decoder, the DEX builder inverts the string
//! extractor, the DER builder inverts the certificate parser. Because the
//! planted fields are known exactly, forged files double as oracles for
//! extractor round-trips and as a labeled stand-in corpus for end-to-end
//! evaluation.
//!
//! Checksums and signature bits are filler by design: the extractors
//! deliberately skip verification, so spending bytes on real crypto would
//! test nothing.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use droidtriage_pipeline::{noisy_or, FraudCategory, RiskLexicon};
use thiserror::Error;

mod axml;
mod corpus;
mod der;
mod dex;
mod icon;
mod zip;

pub use axml::build_manifest_axml;
pub use corpus::{category_spec, default_profile, generate_corpus};
pub use der::build_certificate;
pub use dex::build_dex;

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("certificate window is inverted: not_before is after not_after")]
    InvalidWindow,
    #[error("spec breaks a planted-category invariant: {0}")]
    SpecViolation(String),
    #[error("icon encoding failed")]
    Icon(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The launcher icon to plant, if any. A solid tile hashes to zero, which
/// sits 32 bits from every reference icon, so solids read as harmless; a
/// clone renders the exact 16x16 pattern behind one reference hash, so the
/// icon rule scores it at distance zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IconPlan {
    None,
    Solid { luma: u8, size: u32 },
    Clone(FraudCategory),
}

/// Identity and validity window of the planted v1 signing certificate.
/// Subject equal to issuer reads as self-signed. Timestamps are encoded at
/// whole-second resolution; sub-second precision does not survive the
/// round trip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertPlan {
    pub subject_cn: String,
    pub issuer_cn: String,
    pub not_before: DateTime<Utc>,
    pub not_after: DateTime<Utc>,
}

/// Complete description of one fixture APK. Every field lands verbatim in
/// the assembled file, so a spec is simultaneously the build recipe and the
/// expected extraction result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForgeSpec {
    pub package_name: String,
    pub app_label: String,
    pub permissions: Vec<String>,
    pub dex_strings: Vec<String>,
    pub icon: IconPlan,
    pub certificate: Option<CertPlan>,
    pub planted_category: FraudCategory,
}

impl ForgeSpec {
    /// Check the planted-category invariants against the builtin rule
    /// tables: a legitimate spec must trip nothing, a fraud spec must carry
    /// at least two indicators of its own category whose combined strength
    /// clears 0.6, with no rival category planted more heavily.
    ///
    /// Corpus generation validates every spec it emits; hand-built specs
    /// (round-trip fixtures, adversarial tests) may skip this freely.
    pub fn validate(&self) -> Result<(), ForgeError> {
        let lexicon = RiskLexicon::builtin();
        let violation = |msg: String| Err(ForgeError::SpecViolation(msg));

        let mut haystacks: Vec<String> = vec![
            self.package_name.to_lowercase(),
            self.app_label.to_lowercase(),
        ];
        haystacks.extend(self.dex_strings.iter().map(|s| s.to_lowercase()));
        let planted = |term: &str| haystacks.iter().any(|h| h.contains(term));

        if self.planted_category == FraudCategory::Legitimate {
            for term in lexicon.terms.keys() {
                if planted(term) {
                    return violation(format!("legitimate spec contains the term `{term}`"));
                }
            }
            for perm in &self.permissions {
                if lexicon.dangerous_permissions.contains_key(perm) {
                    return violation(format!("legitimate spec requests `{perm}`"));
                }
            }
            if let IconPlan::Clone(family) = self.icon {
                return violation(format!("legitimate spec clones the {family} icon"));
            }
            return Ok(());
        }

        let mut weights = Vec::new();
        let mut mass = std::collections::BTreeMap::<FraudCategory, f64>::new();
        for (term, entry) in &lexicon.terms {
            if planted(term) {
                *mass.entry(entry.category).or_insert(0.0) += entry.weight;
                if entry.category == self.planted_category {
                    weights.push(entry.weight);
                }
            }
        }
        if let IconPlan::Clone(family) = self.icon {
            if family != self.planted_category {
                return violation(format!(
                    "spec planted as {} but clones the {family} icon",
                    self.planted_category
                ));
            }
            *mass.entry(family).or_insert(0.0) += 1.0;
            weights.push(1.0);
        }
        if weights.len() < 2 {
            return violation(format!(
                "{} spec carries {} indicator(s); at least two are required",
                self.planted_category,
                weights.len()
            ));
        }
        let strength = noisy_or(weights.iter().copied());
        if strength <= 0.6 {
            return violation(format!(
                "{} indicators combine to {strength:.3}, not above 0.6",
                self.planted_category
            ));
        }
        let own = mass[&self.planted_category];
        for (category, total) in &mass {
            if *category != self.planted_category && *total >= own {
                return violation(format!(
                    "rival category {category} planted at {total:.2} >= {own:.2}"
                ));
            }
        }
        Ok(())
    }
}

/// Assemble the spec into APK bytes: stored-entry ZIP holding the binary
/// manifest, one DEX, and the optional certificate and icon entries. The
/// output is a pure function of the spec; timestamps are fixed.
pub fn assemble_bytes(spec: &ForgeSpec) -> Result<Vec<u8>, ForgeError> {
    let mut entries: Vec<(&str, Vec<u8>)> = vec![
        ("AndroidManifest.xml", build_manifest_axml(spec)),
        ("classes.dex", build_dex(&spec.dex_strings)),
    ];
    if let Some(plan) = &spec.certificate {
        entries.push((
            "META-INF/CERT.RSA",
            build_certificate(
                &plan.subject_cn,
                &plan.issuer_cn,
                plan.not_before,
                plan.not_after,
            )?,
        ));
    }
    if let Some(png) = icon::render_icon(&spec.icon)? {
        entries.push(("res/mipmap-mdpi/icon.png", png));
    }
    Ok(zip::write_zip(&entries))
}

/// Assemble the spec and write it to `out_path`.
pub fn assemble_apk(spec: &ForgeSpec, out_path: &Path) -> Result<PathBuf, ForgeError> {
    let bytes = assemble_bytes(spec)?;
    std::fs::write(out_path, bytes)?;
    Ok(out_path.to_path_buf())
}
