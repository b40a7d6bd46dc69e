//! Corpus-scale scoring for the triage pipeline: manifest ingestion, a
//! seeded stratified split, parallel batch runs, and weighted
//! accuracy/precision/recall/F1 reporting.

mod corpus;
mod metrics;
mod run;

pub use corpus::{build_index, load_corpus, stratified_split, CorpusEntry, CorpusError};
pub use metrics::{
    confusion, metrics, metrics_table, table, BinaryLabel, ClassMetrics, ConfusionMatrix,
    MetricsError, MetricsReport,
};
pub use run::{evaluate, ApkVerdictReport, EvalConfig, EvalError, Evaluation};
