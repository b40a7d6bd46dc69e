//! Batch pipeline execution over a test split, with binary headline metrics
//! and the per-category matrix in one report.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use droidtriage_apk::build_feature_bundle;
use droidtriage_pipeline::{run_pipeline, AgentSuite, FraudCategory, Policy};
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{CorpusError, CorpusEntry};
use crate::metrics::{
    metrics, BinaryLabel, ConfusionMatrix, MetricsError, MetricsReport,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("test entry `{0}` is part of the tuning set")]
    TuningOverlap(String),
}

pub struct EvalConfig {
    pub suite: AgentSuite,
    pub policy: Policy,
    pub worker_count: usize,
    /// Ids the rule tables were tuned on (normally the train split). Scoring
    /// any of them would leak tuning data into the metrics, so evaluate
    /// refuses instead.
    pub tuning_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApkVerdictReport {
    pub id: String,
    pub label: FraudCategory,
    pub predicted: FraudCategory,
    pub fraud_probability: Option<f64>,
    pub low_confidence: bool,
    /// Extraction or pipeline failure. The entry still counts, conservatively
    /// scored as a legitimate prediction; dropping it would inflate metrics.
    pub failed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub summary: MetricsReport<BinaryLabel>,
    pub per_category: MetricsReport<FraudCategory>,
    pub binary_matrix: ConfusionMatrix<BinaryLabel>,
    pub category_matrix: ConfusionMatrix<FraudCategory>,
    pub failures: usize,
    pub verdicts: Vec<ApkVerdictReport>,
}

/// Runs the pipeline once per test entry, up to `worker_count` in parallel,
/// and scores the outcomes. Verdict order follows the input order.
pub fn evaluate(test: &[CorpusEntry], config: &EvalConfig) -> Result<Evaluation, EvalError> {
    if let Some(entry) = test.iter().find(|e| config.tuning_ids.contains(&e.id)) {
        return Err(EvalError::TuningOverlap(entry.id.clone()));
    }

    let slots: Mutex<Vec<(usize, ApkVerdictReport)>> = Mutex::new(Vec::with_capacity(test.len()));
    let cursor = AtomicUsize::new(0);
    let workers = config.worker_count.clamp(1, test.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                let Some(entry) = test.get(i) else { break };
                let report = judge(entry, config);
                slots.lock().unwrap().push((i, report));
            });
        }
    });
    let mut collected = slots.into_inner().unwrap();
    collected.sort_by_key(|(i, _)| *i);
    let verdicts: Vec<ApkVerdictReport> = collected.into_iter().map(|(_, v)| v).collect();

    let category_pairs: Vec<(FraudCategory, FraudCategory)> =
        verdicts.iter().map(|v| (v.label, v.predicted)).collect();
    let binary_pairs: Vec<(BinaryLabel, BinaryLabel)> = category_pairs
        .iter()
        .map(|&(label, predicted)| {
            (
                BinaryLabel::from_category(label),
                BinaryLabel::from_category(predicted),
            )
        })
        .collect();
    let category_matrix =
        ConfusionMatrix::from_pairs(FraudCategory::ALL.to_vec(), &category_pairs)?;
    let binary_matrix = ConfusionMatrix::from_pairs(BinaryLabel::ALL.to_vec(), &binary_pairs)?;
    let summary = metrics(&binary_matrix)?;
    let per_category = metrics(&category_matrix)?;
    let failures = verdicts.iter().filter(|v| v.failed).count();

    Ok(Evaluation {
        summary,
        per_category,
        binary_matrix,
        category_matrix,
        failures,
        verdicts,
    })
}

fn judge(entry: &CorpusEntry, config: &EvalConfig) -> ApkVerdictReport {
    let outcome = build_feature_bundle(&entry.apk_path)
        .map_err(|e| e.to_string())
        .and_then(|bundle| {
            run_pipeline(Arc::new(bundle), &config.suite, &config.policy)
                .map_err(|e| e.to_string())
        });
    match outcome {
        Ok(verdict) => ApkVerdictReport {
            id: entry.id.clone(),
            label: entry.label,
            predicted: verdict.category,
            fraud_probability: verdict.fraud_probability,
            low_confidence: verdict.low_confidence,
            failed: false,
            error: None,
        },
        Err(message) => ApkVerdictReport {
            id: entry.id.clone(),
            label: entry.label,
            predicted: FraudCategory::Legitimate,
            fraud_probability: None,
            low_confidence: true,
            failed: true,
            error: Some(message),
        },
    }
}
