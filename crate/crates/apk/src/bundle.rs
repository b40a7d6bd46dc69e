//! Bundle assembly: one call turns an APK path into the immutable
//! multimodal record every downstream agent reads.

use md5::Md5;
use serde::Serialize;
use sha1::Sha1;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::axml::{decode_manifest, AxmlError, ManifestInfo};
use crate::cert::{parse_certificate, CertificateInfo, DerError};
use crate::dex::{extract_dex_strings, DexError, DexStringTable};
use crate::icon::{extract_icon, IconAsset, IconError};
use crate::urls::harvest_urls;
use crate::zip::{open_apk, ZipError};

const MANIFEST_ENTRY: &str = "AndroidManifest.xml";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error(transparent)]
    Container(#[from] ZipError),
    #[error("apk has no AndroidManifest.xml entry")]
    MissingManifest,
    /// Manifest decode failure is fatal: every agent needs the metadata.
    #[error("failed to decode AndroidManifest.xml")]
    Manifest(#[from] AxmlError),
    #[error("failed to parse signing certificate")]
    Certificate(#[from] DerError),
    #[error("failed to decode launcher icon")]
    Icon(#[from] IconError),
    #[error("failed to extract dex strings")]
    Dex(#[from] DexError),
}

/// Whole-file digests, all lowercase hex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fingerprints {
    pub md5: String,
    pub sha1: String,
    pub sha256: String,
}

impl Fingerprints {
    pub fn over(bytes: &[u8]) -> Fingerprints {
        Fingerprints {
            md5: hex(&Md5::digest(bytes)),
            sha1: hex(&Sha1::digest(bytes)),
            sha256: hex(&Sha256::digest(bytes)),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The complete multimodal record for one APK. Certificate and icon absence
/// are recorded facts; everything else is mandatory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApkFeatureBundle {
    pub manifest: ManifestInfo,
    pub certificate: Option<CertificateInfo>,
    pub icon: Option<IconAsset>,
    pub dex_strings: DexStringTable,
    pub urls: Vec<String>,
    pub fingerprints: Fingerprints,
}

/// Run every extractor over one APK file.
pub fn build_feature_bundle(path: impl AsRef<std::path::Path>) -> Result<ApkFeatureBundle, BundleError> {
    let container = open_apk(path)?;
    if !container.has_entry(MANIFEST_ENTRY) {
        return Err(BundleError::MissingManifest);
    }
    let manifest_bytes = container.read_entry(MANIFEST_ENTRY)?;
    let manifest = decode_manifest(&manifest_bytes)?;
    let dex_strings = extract_dex_strings(&container)?;
    let certificate = parse_certificate(&container)?;
    let icon = extract_icon(&container, &manifest)?;
    let urls = harvest_urls(&dex_strings, &manifest);
    let fingerprints = Fingerprints::over(container.file_bytes());
    Ok(ApkFeatureBundle {
        manifest,
        certificate,
        icon,
        dex_strings,
        urls,
        fingerprints,
    })
}
