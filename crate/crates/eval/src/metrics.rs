//! Confusion-matrix bookkeeping and the weighted (support-proportional)
//! metric family used for corpus scoring.

use std::collections::BTreeMap;

use droidtriage_pipeline::FraudCategory;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("prediction and label key sets differ at `{0}`")]
    KeyMismatch(String),
    #[error("confusion matrix holds no samples")]
    EmptyMatrix,
    #[error("counts are not a {classes}x{classes} square")]
    ShapeMismatch { classes: usize },
    #[error("matrix lists the same class twice")]
    DuplicateClass,
    #[error("sample pair names a class missing from the matrix")]
    UnknownClass,
}

/// Headline mapping: the triage decision is fraud-versus-legitimate even
/// though verdicts carry a finer category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryLabel {
    Legitimate,
    Fraudulent,
}

impl BinaryLabel {
    pub const ALL: [BinaryLabel; 2] = [BinaryLabel::Legitimate, BinaryLabel::Fraudulent];

    pub fn from_category(category: FraudCategory) -> BinaryLabel {
        if category.is_fraud() {
            BinaryLabel::Fraudulent
        } else {
            BinaryLabel::Legitimate
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Legitimate => "legitimate",
            BinaryLabel::Fraudulent => "fraudulent",
        }
    }
}

/// `counts[i][j]` is the number of samples whose true class is `classes[i]`
/// and whose predicted class is `classes[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix<C> {
    pub classes: Vec<C>,
    pub counts: Vec<Vec<u64>>,
}

impl<C: Copy + Ord> ConfusionMatrix<C> {
    pub fn from_counts(classes: Vec<C>, counts: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let n = classes.len();
        for (i, a) in classes.iter().enumerate() {
            if classes[i + 1..].contains(a) {
                return Err(MetricsError::DuplicateClass);
            }
        }
        if counts.len() != n || counts.iter().any(|row| row.len() != n) {
            return Err(MetricsError::ShapeMismatch { classes: n });
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn from_pairs(classes: Vec<C>, pairs: &[(C, C)]) -> Result<Self, MetricsError> {
        let n = classes.len();
        let mut matrix = ConfusionMatrix::from_counts(classes, vec![vec![0; n]; n])?;
        for &(truth, predicted) in pairs {
            let row = matrix.index_of(truth).ok_or(MetricsError::UnknownClass)?;
            let col = matrix.index_of(predicted).ok_or(MetricsError::UnknownClass)?;
            matrix.counts[row][col] += 1;
        }
        Ok(matrix)
    }

    fn index_of(&self, class: C) -> Option<usize> {
        self.classes.iter().position(|c| *c == class)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Tallies predictions against labels over the full category set, classes in
/// enum order. The key sets must coincide exactly.
pub fn confusion(
    predictions: &BTreeMap<String, FraudCategory>,
    labels: &BTreeMap<String, FraudCategory>,
) -> Result<ConfusionMatrix<FraudCategory>, MetricsError> {
    let stray = labels
        .keys()
        .find(|id| !predictions.contains_key(*id))
        .or_else(|| predictions.keys().find(|id| !labels.contains_key(*id)));
    if let Some(id) = stray {
        return Err(MetricsError::KeyMismatch(id.clone()));
    }
    let pairs: Vec<(FraudCategory, FraudCategory)> = labels
        .iter()
        .map(|(id, label)| (*label, predictions[id]))
        .collect();
    ConfusionMatrix::from_pairs(FraudCategory::ALL.to_vec(), &pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport<C: Ord> {
    pub accuracy: f64,
    pub precision_w: f64,
    pub recall_w: f64,
    pub f1_w: f64,
    pub per_class: BTreeMap<C, ClassMetrics>,
}

/// Accuracy plus per-class precision/recall/F1 and their support-weighted
/// aggregates. Zero-denominator classes score 0 rather than NaN.
pub fn metrics<C: Copy + Ord>(
    matrix: &ConfusionMatrix<C>,
) -> Result<MetricsReport<C>, MetricsError> {
    let n = matrix.classes.len();
    let total = matrix.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let trace: u64 = (0..n).map(|i| matrix.counts[i][i]).sum();
    let accuracy = trace as f64 / total as f64;

    let mut per_class = BTreeMap::new();
    let mut precision_w = 0.0;
    let mut f1_w = 0.0;
    for (i, class) in matrix.classes.iter().enumerate() {
        let tp = matrix.counts[i][i];
        let support: u64 = matrix.counts[i].iter().sum();
        let predicted: u64 = (0..n).map(|r| matrix.counts[r][i]).sum();
        let precision = if predicted == 0 {
            0.0
        } else {
            tp as f64 / predicted as f64
        };
        let recall = if support == 0 {
            0.0
        } else {
            tp as f64 / support as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let weight = support as f64 / total as f64;
        precision_w += weight * precision;
        f1_w += weight * f1;
        per_class.insert(
            *class,
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            },
        );
    }

    // Weighted recall telescopes: sum over classes of (support/total) *
    // (tp/support) is trace/total. Computing it through the same expression
    // as accuracy keeps the identity exact in floating point.
    let recall_w = trace as f64 / total as f64;

    Ok(MetricsReport {
        accuracy,
        precision_w,
        recall_w,
        f1_w,
        per_class,
    })
}

/// One header plus one row, percentages with two decimals, in the reporting
/// order ACC / Precision / Recall / F1. Takes the raw aggregates so callers
/// can also render means over several runs.
pub fn table(accuracy: f64, precision_w: f64, recall_w: f64, f1_w: f64) -> String {
    format!(
        "ACC(%)  Precision(%)  Recall(%)  F1(%)\n{:>6.2}  {:>12.2}  {:>9.2}  {:>5.2}\n",
        accuracy * 100.0,
        precision_w * 100.0,
        recall_w * 100.0,
        f1_w * 100.0,
    )
}

pub fn metrics_table<C: Ord>(report: &MetricsReport<C>) -> String {
    table(
        report.accuracy,
        report.precision_w,
        report.recall_w,
        report.f1_w,
    )
}
