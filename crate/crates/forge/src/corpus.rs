//! Labeled corpus generation: seeded specs per category, one APK file per
//! spec, and a JSON-lines manifest binding ids to files and labels.
//!
//! Indicator strengths are chosen well above the decision threshold and
//! fraud families share signing certificates, URL hosts and package
//! prefixes within (never across) a category, so cross-application links
//! reinforce rather than blur the planted labels.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{TimeZone, Utc};
use droidtriage_pipeline::FraudCategory;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{assemble_apk, CertPlan, ForgeError, ForgeSpec, IconPlan};

/// Desk-scale corpus shape: fraud-majority overall, gambling the largest
/// fraud family.
pub fn default_profile() -> BTreeMap<FraudCategory, usize> {
    BTreeMap::from([
        (FraudCategory::Legitimate, 20),
        (FraudCategory::Gambling, 10),
        (FraudCategory::Scam, 5),
        (FraudCategory::SexualContent, 5),
    ])
}

/// Generate `counts` specs per category under `out_dir` and write a
/// `corpus.jsonl` manifest whose `path` fields are relative to it. Every
/// spec passes validation before assembly; the same seed reproduces every
/// byte.
pub fn generate_corpus(
    seed: u64,
    counts: &BTreeMap<FraudCategory, usize>,
    out_dir: &Path,
) -> Result<PathBuf, ForgeError> {
    std::fs::create_dir_all(out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = Vec::new();
    for (&category, &count) in counts {
        for ordinal in 0..count {
            let spec = category_spec(category, ordinal, &mut rng);
            spec.validate()?;
            let id = format!("{}{ordinal:03}", id_prefix(category));
            let file_name = format!("{id}.apk");
            assemble_apk(&spec, &out_dir.join(&file_name))?;
            let line = serde_json::json!({
                "id": id,
                "path": file_name,
                "label": category.as_str(),
            });
            writeln!(manifest, "{line}").expect("writing into a vec cannot fail");
        }
    }
    let manifest_path = out_dir.join("corpus.jsonl");
    std::fs::write(&manifest_path, manifest)?;
    Ok(manifest_path)
}

fn id_prefix(category: FraudCategory) -> char {
    match category {
        FraudCategory::Legitimate => 'l',
        FraudCategory::Gambling => 'g',
        FraudCategory::Scam => 's',
        FraudCategory::SexualContent => 'x',
        FraudCategory::OtherFraud => 'o',
    }
}

/// The spec template for one corpus member. Ordinals individualize names
/// and ids; the rng only varies fields that carry no risk signal, so the
/// planted margins are identical across members of a category.
pub fn category_spec(category: FraudCategory, ordinal: usize, rng: &mut impl Rng) -> ForgeSpec {
    let session = format!("session-{:08x}", rng.random::<u32>());
    match category {
        FraudCategory::Gambling => ForgeSpec {
            package_name: format!("com.goldspin.g{ordinal}"),
            app_label: format!("Casino Jackpot {ordinal}"),
            permissions: perms(&["INTERNET", "SEND_SMS", "READ_CONTACTS"]),
            dex_strings: vec![
                format!("Lcom/goldspin/g{ordinal}/Main;"),
                "spin to win".into(),
                "roulette table".into(),
                "http://lucky.goldspin-play.net/bets".into(),
                session,
            ],
            icon: IconPlan::Clone(FraudCategory::Gambling),
            certificate: Some(family_cert("Test")),
            planted_category: category,
        },
        FraudCategory::Scam => ForgeSpec {
            package_name: format!("com.vaulttrust.s{ordinal}"),
            app_label: format!("Prize Claim Center {ordinal}"),
            permissions: perms(&["INTERNET", "SEND_SMS", "READ_SMS"]),
            dex_strings: vec![
                format!("Lcom/vaulttrust/s{ordinal}/Main;"),
                "guaranteed profit plan".into(),
                "please verify your account now".into(),
                "refund portal open".into(),
                "https://secure.vaulttrust-portal.net/claim".into(),
                session,
            ],
            icon: IconPlan::Clone(FraudCategory::Scam),
            certificate: Some(family_cert("Debug")),
            planted_category: category,
        },
        FraudCategory::SexualContent => ForgeSpec {
            package_name: format!("com.nightglow.x{ordinal}"),
            app_label: format!("Adult Webcam Chat {ordinal}"),
            permissions: perms(&["INTERNET", "READ_CONTACTS", "RECORD_AUDIO"]),
            dex_strings: vec![
                format!("Lcom/nightglow/x{ordinal}/Main;"),
                "nude gallery loader".into(),
                "hookup finder".into(),
                "http://cam.nightglow-live.net/xxx".into(),
                session,
            ],
            icon: IconPlan::Clone(FraudCategory::SexualContent),
            certificate: Some(family_cert("Unknown")),
            planted_category: category,
        },
        FraudCategory::OtherFraud => ForgeSpec {
            package_name: format!("com.sysboost.o{ordinal}"),
            app_label: format!("System Update Required {ordinal}"),
            permissions: perms(&["INTERNET", "REQUEST_INSTALL_PACKAGES", "READ_PHONE_STATE"]),
            dex_strings: vec![
                format!("Lcom/sysboost/o{ordinal}/Main;"),
                "free premium unlock".into(),
                "http://cdn.sysboost-update.net/pkg".into(),
                session,
            ],
            icon: IconPlan::Clone(FraudCategory::OtherFraud),
            certificate: Some(family_cert("Android")),
            planted_category: category,
        },
        FraudCategory::Legitimate => {
            let mut permissions = perms(&["INTERNET"]);
            for extra in ["ACCESS_NETWORK_STATE", "VIBRATE", "WAKE_LOCK"] {
                if rng.random_bool(0.5) {
                    permissions.push(format!("android.permission.{extra}"));
                }
            }
            permissions.sort();
            let icon = if ordinal % 5 == 4 {
                IconPlan::None
            } else {
                IconPlan::Solid { luma: rng.random_range(40..=220), size: 48 }
            };
            let certificate = (ordinal % 4 != 3).then(|| CertPlan {
                subject_cn: format!("Vendor {ordinal:02}"),
                issuer_cn: "Forge Root CA".into(),
                not_before: Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap(),
                not_after: Utc.with_ymd_and_hms(2031, 3, 1, 0, 0, 0).unwrap(),
            });
            ForgeSpec {
                package_name: format!("com.vendor{ordinal:02}.notes"),
                app_label: format!("Field Notes {ordinal}"),
                permissions,
                dex_strings: vec![
                    format!("Lcom/vendor{ordinal:02}/notes/Main;"),
                    "sync complete".into(),
                    format!("https://api.vendor{ordinal:02}-cloud.net/v1"),
                    session,
                ],
                icon,
                certificate,
                planted_category: category,
            }
        }
    }
}

fn perms(names: &[&str]) -> Vec<String> {
    names
        .iter()
        .map(|n| format!("android.permission.{n}"))
        .collect()
}

/// One shared certificate identity per fraud family: placeholder CN,
/// self-signed, ten-year window. Identical plans produce identical bytes,
/// which is what makes certificate links land within the family.
fn family_cert(cn: &str) -> CertPlan {
    CertPlan {
        subject_cn: cn.into(),
        issuer_cn: cn.into(),
        not_before: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
        not_after: Utc.with_ymd_and_hms(2030, 1, 1, 0, 0, 0).unwrap(),
    }
}
