//! URL harvesting from extracted strings.

use std::sync::LazyLock;

use regex::Regex;

use crate::axml::ManifestInfo;
use crate::dex::DexStringTable;

/// Maximal `http(s)://` substrings over the RFC-3986 host/path charset.
/// Letter classes are case-insensitive; scheme and host are normalized to
/// lowercase afterwards, path case is preserved.
static URL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)https?://[a-z0-9\-._~%]+(?::\d+)?(?:/[a-z0-9\-._~%!$&'()*+,;=:@/]*)?")
        .expect("url pattern compiles")
});

/// Collect every URL-shaped substring from the DEX string pool and manifest
/// text fields, deduplicated and sorted.
pub fn harvest_urls(dex_strings: &DexStringTable, manifest: &ManifestInfo) -> Vec<String> {
    let manifest_fields = [
        manifest.package_name.as_str(),
        manifest.version_name.as_str(),
        manifest.app_label.as_str(),
    ];
    let mut urls: Vec<String> = dex_strings
        .strings
        .iter()
        .map(String::as_str)
        .chain(manifest_fields)
        .chain(manifest.permissions.iter().map(String::as_str))
        .chain(manifest.activities.iter().map(String::as_str))
        .chain(manifest.services.iter().map(String::as_str))
        .flat_map(|text| URL_RE.find_iter(text))
        .map(|m| normalize(m.as_str()))
        .collect();
    urls.sort();
    urls.dedup();
    urls
}

/// Lowercase scheme and host; everything from the first `/` or `:` after the
/// authority keeps its case.
fn normalize(url: &str) -> String {
    let scheme_end = url.find("://").expect("matched urls contain ://") + 3;
    let rest = &url[scheme_end..];
    let host_end = rest.find(['/', ':']).unwrap_or(rest.len());
    let mut out = url[..scheme_end].to_ascii_lowercase();
    out.push_str(&rest[..host_end].to_ascii_lowercase());
    out.push_str(&rest[host_end..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axml::ManifestInfo;

    fn manifest(label: &str) -> ManifestInfo {
        ManifestInfo {
            package_name: "com.ex.a".into(),
            version_code: 1,
            version_name: "1.0".into(),
            app_label: label.into(),
            permissions: vec![],
            activities: vec![],
            services: vec![],
            icon_ref: None,
        }
    }

    fn dex(strings: &[&str]) -> DexStringTable {
        DexStringTable {
            strings: strings.iter().map(|s| s.to_string()).collect(),
            class_names: vec![],
            dex_count: 1,
            replacement_count: 0,
        }
    }

    #[test]
    fn harvests_and_lowercases_host() {
        let urls = harvest_urls(&dex(&["visit http://Bet-win.example/a now"]), &manifest(""));
        assert_eq!(urls, ["http://bet-win.example/a"]);
    }

    #[test]
    fn no_url_shaped_substrings_yield_empty() {
        let urls = harvest_urls(&dex(&["hello", "https:/missing-slash", "x.io"]), &manifest(""));
        assert!(urls.is_empty());
    }

    #[test]
    fn duplicates_across_sources_collapse() {
        let urls = harvest_urls(
            &dex(&["see https://pay.example/checkout"]),
            &manifest("label https://pay.example/checkout"),
        );
        assert_eq!(urls, ["https://pay.example/checkout"]);
    }

    #[test]
    fn scheme_is_lowercased_and_path_case_kept() {
        let urls = harvest_urls(&dex(&["HTTPS://X.Io:8443/Path/File?"]), &manifest(""));
        assert_eq!(urls, ["https://x.io:8443/Path/File"]);
    }

    #[test]
    fn output_is_sorted() {
        let urls = harvest_urls(&dex(&["http://b.example/z http://a.example/y"]), &manifest(""));
        assert_eq!(urls, ["http://a.example/y", "http://b.example/z"]);
    }
}
