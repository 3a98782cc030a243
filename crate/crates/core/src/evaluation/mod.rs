//! Confusion matrices, accuracy/F1 and PCA diagnostics.

mod pca;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::NUM_CLASSES;

pub use pca::{pca_fit, pca_project, PcaModel};
pub use report::{export_reports, CONFUSION_FILE, METRICS_FILE, PCA_FILE};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("label {0} outside 0..=9")]
    LabelOutOfRange(u8),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("PCA needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("cannot extract {k} components from {n} samples of dimension {dim}")]
    TooManyComponents { k: usize, n: usize, dim: usize },
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = EvaluationError> = std::result::Result<T, E>;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn get(&self, truth: u8, predicted: u8) -> u64 {
        self.counts[truth as usize][predicted as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|row| row[k]).sum()
    }
}

pub fn confusion(truth: &[u8], predicted: &[u8]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(EvaluationError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        for l in [t, p] {
            if l as usize >= NUM_CLASSES {
                return Err(EvaluationError::LabelOutOfRange(l));
            }
        }
        cm.counts[t as usize][p as usize] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: u8,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: u64,
    pub accuracy: f64,
    /// Unweighted mean over classes that occur in the true labels.
    pub f1_macro: f64,
    /// Support-weighted mean.
    pub f1_weighted: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(EvaluationError::EmptyMatrix);
    }
    let per_class: Vec<ClassMetrics> = (0..NUM_CLASSES)
        .map(|k| {
            let tp = cm.counts[k][k];
            let precision = ratio(tp, cm.col_sum(k));
            let recall = ratio(tp, cm.row_sum(k));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                class: k as u8,
                precision,
                recall,
                f1,
                support: cm.row_sum(k),
            }
        })
        .collect();
    let present: Vec<&ClassMetrics> = per_class.iter().filter(|c| c.support > 0).collect();
    let f1_macro = present.iter().map(|c| c.f1).sum::<f64>() / present.len() as f64;
    let f1_weighted = per_class
        .iter()
        .map(|c| c.f1 * c.support as f64)
        .sum::<f64>()
        / total as f64;
    Ok(MetricsReport {
        samples: total,
        accuracy: ratio(cm.trace(), total),
        f1_macro,
        f1_weighted,
        per_class,
    })
}
