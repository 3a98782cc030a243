//! Bernoulli naive Bayes with Laplace smoothing.

use super::{argmax, check_dim, softmax, ClassifierError, Dataset, Prediction, Result};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayesModel {
    dim: usize,
    total: u64,
    class_counts: [u64; NUM_CLASSES],
    /// `active[k * dim + j]`: training rows of class `k` with feature `j` on.
    active: Vec<u64>,
    log_theta: Vec<f64>,
    log_not_theta: Vec<f64>,
}

/// Features above 0.5 count as active.
fn active(v: f64) -> bool {
    v > 0.5
}

pub fn nb_train(data: &Dataset) -> Result<NaiveBayesModel> {
    data.require_nonempty()?;
    let dim = data.dim();
    let mut class_counts = [0u64; NUM_CLASSES];
    let mut counts = vec![0u64; NUM_CLASSES * dim];
    for (row, &label) in data.rows().zip(data.labels()) {
        let k = label as usize;
        class_counts[k] += 1;
        for (j, &v) in row.iter().enumerate() {
            if active(v) {
                counts[k * dim + j] += 1;
            }
        }
    }
    NaiveBayesModel::from_counts(dim, class_counts, counts)
}

impl NaiveBayesModel {
    pub fn from_counts(
        dim: usize,
        class_counts: [u64; NUM_CLASSES],
        active: Vec<u64>,
    ) -> Result<Self> {
        if active.len() != NUM_CLASSES * dim {
            return Err(ClassifierError::Corrupt(format!(
                "naive Bayes table has {} entries, expected {}",
                active.len(),
                NUM_CLASSES * dim
            )));
        }
        let total: u64 = class_counts.iter().sum();
        if total == 0 {
            return Err(ClassifierError::EmptyDataset);
        }
        for k in 0..NUM_CLASSES {
            if active[k * dim..(k + 1) * dim]
                .iter()
                .any(|&a| a > class_counts[k])
            {
                return Err(ClassifierError::Corrupt(format!(
                    "class {k} has more active rows than samples"
                )));
            }
        }
        let mut log_theta = vec![0.0; NUM_CLASSES * dim];
        let mut log_not_theta = vec![0.0; NUM_CLASSES * dim];
        for k in 0..NUM_CLASSES {
            let denom = class_counts[k] as f64 + 2.0;
            for j in 0..dim {
                let theta = (active[k * dim + j] as f64 + 1.0) / denom;
                log_theta[k * dim + j] = theta.ln();
                log_not_theta[k * dim + j] = (1.0 - theta).ln();
            }
        }
        Ok(Self {
            dim,
            total,
            class_counts,
            active,
            log_theta,
            log_not_theta,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn class_counts(&self) -> &[u64; NUM_CLASSES] {
        &self.class_counts
    }

    pub fn active_counts(&self) -> &[u64] {
        &self.active
    }

    pub fn classes(&self) -> Vec<u8> {
        (0..NUM_CLASSES as u8)
            .filter(|&k| self.class_counts[k as usize] > 0)
            .collect()
    }

    /// Unnormalized log posterior per class; `None` for classes absent from
    /// training.
    pub fn log_posteriors(&self, x: &[f64]) -> Result<Vec<Option<f64>>> {
        check_dim(self.dim, x)?;
        Ok((0..NUM_CLASSES)
            .map(|k| {
                if self.class_counts[k] == 0 {
                    return None;
                }
                let prior = (self.class_counts[k] as f64 / self.total as f64).ln();
                let base = k * self.dim;
                let likelihood: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        if active(v) {
                            self.log_theta[base + j]
                        } else {
                            self.log_not_theta[base + j]
                        }
                    })
                    .sum();
                Some(prior + likelihood)
            })
            .collect())
    }

    /// Votes are posterior probabilities (zero for unseen classes).
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let logs = self.log_posteriors(x)?;
        let present: Vec<usize> = (0..NUM_CLASSES).filter(|&k| logs[k].is_some()).collect();
        let scores: Vec<f64> = present
            .iter()
            .map(|&k| logs[k].unwrap_or(f64::NEG_INFINITY))
            .collect();
        let probs = softmax(&scores);
        let mut votes = vec![0.0; NUM_CLASSES];
        for (&k, &p) in present.iter().zip(&probs) {
            votes[k] = p;
        }
        // Argmax on the log scores, not the rounded probabilities.
        let best = argmax(&scores);
        Ok(Prediction {
            class: present[best] as u8,
            confidence: probs[best],
            votes,
        })
    }
}
