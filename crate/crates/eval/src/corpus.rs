//! Corpus manifest ingestion and the seeded stratified train/test split.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use droidtriage_apk::build_feature_bundle;
use droidtriage_pipeline::{CorpusIndex, FraudCategory};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("manifest line {line}: unknown label `{label}`")]
    BadLabel { line: usize, label: String },
    #[error("corpus file `{0}` is missing")]
    MissingFile(PathBuf),
    #[error("duplicate corpus id `{0}`")]
    DuplicateId(String),
    #[error("test fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("class `{class}` has {support} sample(s); the split needs at least 2")]
    ClassTooSmall { class: &'static str, support: usize },
    #[error("failed to extract `{id}`: {message}")]
    Extraction { id: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub id: String,
    pub apk_path: PathBuf,
    pub label: FraudCategory,
}

/// Reads a JSON-lines manifest of `{id, path, label}` records. Relative
/// paths resolve against the manifest's directory; file order is kept.
pub fn load_corpus(manifest_path: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    let text = fs::read_to_string(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut entries = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| CorpusError::BadRecord {
                line,
                message: e.to_string(),
            })?;
        let field = |key: &str| {
            record
                .get(key)
                .and_then(serde_json::Value::as_str)
                .ok_or_else(|| CorpusError::BadRecord {
                    line,
                    message: format!("missing string field `{key}`"),
                })
        };
        let id = field("id")?;
        let path = field("path")?;
        let label_text = field("label")?;
        let label: FraudCategory = label_text.parse().map_err(|_| CorpusError::BadLabel {
            line,
            label: label_text.to_string(),
        })?;
        let apk_path = if Path::new(path).is_absolute() {
            PathBuf::from(path)
        } else {
            base.join(path)
        };
        if !apk_path.is_file() {
            return Err(CorpusError::MissingFile(apk_path));
        }
        if !seen.insert(id.to_string()) {
            return Err(CorpusError::DuplicateId(id.to_string()));
        }
        entries.push(CorpusEntry {
            id: id.to_string(),
            apk_path,
            label,
        });
    }
    Ok(entries)
}

/// Per class, draws round-half-up(support * test_fraction) members into the
/// test side by seeded shuffle. Both sides keep corpus order. Deterministic
/// for a fixed seed; classes are consumed in enum order off one stream.
pub fn stratified_split(
    corpus: &[CorpusEntry],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<CorpusEntry>, Vec<CorpusEntry>), CorpusError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::BadFraction(test_fraction));
    }
    let mut by_class: BTreeMap<FraudCategory, Vec<usize>> = BTreeMap::new();
    for (i, entry) in corpus.iter().enumerate() {
        by_class.entry(entry.label).or_default().push(i);
    }
    for (class, members) in &by_class {
        if members.len() < 2 {
            return Err(CorpusError::ClassTooSmall {
                class: class.as_str(),
                support: members.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_indices: BTreeSet<usize> = BTreeSet::new();
    for members in by_class.values() {
        let take = (members.len() as f64 * test_fraction + 0.5).floor() as usize;
        let mut pool = members.clone();
        pool.shuffle(&mut rng);
        test_indices.extend(pool.into_iter().take(take));
    }
    let mut train = Vec::with_capacity(corpus.len() - test_indices.len());
    let mut test = Vec::with_capacity(test_indices.len());
    for (i, entry) in corpus.iter().enumerate() {
        if test_indices.contains(&i) {
            test.push(entry.clone());
        } else {
            train.push(entry.clone());
        }
    }
    Ok((train, test))
}

/// Extracts every training APK into the cross-app similarity index. A train
/// entry that fails extraction aborts the build; silently thinning the index
/// would skew link-analysis evidence.
pub fn build_index(train: &[CorpusEntry]) -> Result<CorpusIndex, CorpusError> {
    let mut index = CorpusIndex::new();
    for entry in train {
        let bundle =
            build_feature_bundle(&entry.apk_path).map_err(|e| CorpusError::Extraction {
                id: entry.id.clone(),
                message: e.to_string(),
            })?;
        index.add(&entry.id, entry.label, &bundle);
    }
    Ok(index)
}
