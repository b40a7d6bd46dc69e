//! Static feature extraction for Android application packages.
//!
//! An APK is opened as a ZIP container and decomposed, without executing any
//! app code, into a single immutable [`ApkFeatureBundle`]: manifest metadata
//! decoded from the binary `AndroidManifest.xml`, the merged DEX string pool,
//! the v1 signing certificate, the launcher icon with a perceptual hash,
//! harvested URLs, and whole-file fingerprints.

mod axml;
mod bundle;
mod cert;
mod dex;
mod icon;
#[cfg(test)]
mod testutil;
mod urls;
mod zip;

pub use axml::{decode_manifest, AxmlError, ManifestInfo};
pub use bundle::{build_feature_bundle, ApkFeatureBundle, BundleError, Fingerprints};
pub use cert::{parse_certificate, CertificateInfo, DerError};
pub use dex::{extract_dex_strings, DexError, DexStringTable};
pub use icon::{average_hash, extract_icon, IconAsset, IconError, IconFormat};
pub use urls::harvest_urls;
pub use zip::{open_apk, ApkContainer, ZipEntry, ZipError};
