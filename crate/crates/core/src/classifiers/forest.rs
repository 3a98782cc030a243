//! Bagged random forest with majority voting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, DecisionTree};
use super::{argmax, check_dim, Dataset, Prediction, Result, TrainParams, FORMAT_VERSION};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub training_size: usize,
    /// RFC 3339, UTC.
    pub created_at: String,
    pub format_version: u64,
}

impl ModelMetadata {
    pub fn now(training_size: usize) -> Self {
        Self {
            training_size,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            format_version: FORMAT_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub classes: Vec<u8>,
    pub feature_dim: usize,
    pub seed: u64,
    pub metadata: ModelMetadata,
}

/// Random stream for tree `index` of a forest seeded with `seed`. Each tree
/// gets its own ChaCha stream, so results do not depend on scheduling.
pub fn tree_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `n` row indices drawn uniformly with replacement.
pub fn bootstrap_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Trains `params.n_trees` trees, each on its own bootstrap sample.
pub fn train_forest(data: &Dataset, params: &TrainParams) -> Result<ForestModel> {
    data.require_nonempty()?;
    params.validate(data.dim())?;
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree_rng(params.seed, i as u64);
            let sample = bootstrap_indices(data.len(), &mut rng);
            grow(data, sample, params, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        classes: data.classes(),
        feature_dim: data.dim(),
        seed: params.seed,
        metadata: ModelMetadata::now(data.len()),
    })
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        check_dim(self.feature_dim, x)?;
        let mut votes = [0u32; NUM_CLASSES];
        for tree in &self.trees {
            votes[tree.leaf(x).0 as usize] += 1;
        }
        let votes: Vec<f64> = votes.iter().map(|&v| v as f64).collect();
        let class = argmax(&votes);
        Ok(Prediction {
            class: class as u8,
            confidence: votes[class] / self.trees.len() as f64,
            votes,
        })
    }
}
