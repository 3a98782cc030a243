//! Supervised classifiers over fixed-length feature vectors.
//!
//! The random forest is the production model; the single tree, kNN,
//! Bernoulli naive Bayes and linear SVM exist for comparison. Every tie in
//! every classifier resolves to the smallest class index.

mod forest;
mod knn;
mod naive_bayes;
mod persist;
mod svm;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::NUM_CLASSES;

pub use forest::{bootstrap_indices, train_forest, tree_rng, ForestModel, ModelMetadata};
pub use knn::{knn_predict, KnnModel};
pub use naive_bayes::{nb_train, NaiveBayesModel};
pub use persist::{load_model, save_model, FORMAT_VERSION};
pub use svm::{svm_train, SvmModel, SvmParams};
pub use tree::{train_tree, DecisionTree, Node};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("expected feature dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("label {0} outside 0..=9")]
    LabelOutOfRange(u8),
    #[error("k = {k} exceeds the {n} training samples")]
    KTooLarge { k: usize, n: usize },
    #[error("training needs at least two classes")]
    SingleClass,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u64),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = ClassifierError> = std::result::Result<T, E>;

/// Feature matrix (row-major) with one class label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if dim == 0 {
            return Err(ClassifierError::InvalidParams(
                "feature dimension must be positive".into(),
            ));
        }
        if features.len() != dim * labels.len() {
            return Err(ClassifierError::DimensionMismatch {
                expected: dim * labels.len(),
                actual: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(ClassifierError::LabelOutOfRange(bad));
        }
        Ok(Self {
            dim,
            features,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(ClassifierError::DimensionMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        if rows.len() != labels.len() {
            return Err(ClassifierError::InvalidParams(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        Self::new(dim, rows.concat(), labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Copies the given rows (repeats allowed) into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<u8> {
        let mut seen = [false; NUM_CLASSES];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (0..NUM_CLASSES as u8)
            .filter(|&c| seen[c as usize])
            .collect()
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(ClassifierError::EmptyDataset)
        } else {
            Ok(())
        }
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(ClassifierError::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

/// Index of the largest value; the first wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Result of classifying one feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: u8,
    /// Per-class tree votes for forests, per-class scores otherwise.
    pub votes: Vec<f64>,
    pub confidence: f64,
}

/// Forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub n_trees: usize,
    /// `None` means ⌈√d⌉.
    pub features_per_split: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            features_per_split: None,
            max_depth: None,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn features_per_split_for(&self, dim: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(ClassifierError::InvalidParams(
                "n_trees must be at least 1".into(),
            ));
        }
        let k = self.features_per_split_for(dim);
        if k == 0 || k > dim {
            return Err(ClassifierError::InvalidParams(format!(
                "features_per_split {k} outside 1..={dim}"
            )));
        }
        Ok(())
    }
}

/// Any trained classifier, as stored in a model file.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Forest(ForestModel),
    /// A single CART tree grown on the full training set.
    Tree(DecisionTree),
    Knn(KnnModel),
    NaiveBayes(NaiveBayesModel),
    Svm(SvmModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Forest(_) => "forest",
            Model::Tree(_) => "tree",
            Model::Knn(_) => "knn",
            Model::NaiveBayes(_) => "nb",
            Model::Svm(_) => "svm",
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Model::Forest(m) => m.feature_dim,
            Model::Tree(t) => t.feature_dim(),
            Model::Knn(m) => m.train.dim(),
            Model::NaiveBayes(m) => m.feature_dim(),
            Model::Svm(m) => m.feature_dim(),
        }
    }

    pub fn classes(&self) -> Vec<u8> {
        match self {
            Model::Forest(m) => m.classes.clone(),
            Model::Tree(t) => t.classes(),
            Model::Knn(m) => m.train.classes(),
            Model::NaiveBayes(m) => m.classes(),
            Model::Svm(m) => m.classes().to_vec(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        match self {
            Model::Forest(m) => m.predict(x),
            Model::Tree(t) => t.predict(x),
            Model::Knn(m) => m.predict(x),
            Model::NaiveBayes(m) => m.predict(x),
            Model::Svm(m) => m.predict(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassifierKind {
    Forest,
    Tree,
    Knn,
    NaiveBayes,
    Svm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        Self::Forest,
        Self::Tree,
        Self::Knn,
        Self::NaiveBayes,
        Self::Svm,
    ];

    /// Same names as [`Model::kind`] and the model file's `classifier_type`.
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Forest => "forest",
            Self::Tree => "tree",
            Self::Knn => "knn",
            Self::NaiveBayes => "nb",
            Self::Svm => "svm",
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ClassifierError::InvalidParams(format!("unknown classifier {s:?}")))
    }
}

/// Hyperparameters for every classifier kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Forest parameters; the single tree uses the same split settings.
    pub forest: TrainParams,
    pub k: usize,
    pub svm: SvmParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            forest: TrainParams::default(),
            k: 5,
            svm: SvmParams::default(),
        }
    }
}

/// Trains a classifier of the given kind. The single tree is grown on the
/// full training set with the random stream of forest tree 0.
pub fn train_model(kind: ClassifierKind, data: &Dataset, cfg: &TrainConfig) -> Result<Model> {
    Ok(match kind {
        ClassifierKind::Forest => Model::Forest(train_forest(data, &cfg.forest)?),
        ClassifierKind::Tree => Model::Tree(train_tree(
            data,
            &cfg.forest,
            &mut tree_rng(cfg.forest.seed, 0),
        )?),
        ClassifierKind::Knn => Model::Knn(KnnModel::new(data.clone(), cfg.k)?),
        ClassifierKind::NaiveBayes => Model::NaiveBayes(nb_train(data)?),
        ClassifierKind::Svm => Model::Svm(svm_train(data, &cfg.svm)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for k in ClassifierKind::ALL {
            assert_eq!(k.as_str().parse::<ClassifierKind>().unwrap(), k);
        }
        assert!("mlp".parse::<ClassifierKind>().is_err());
    }

    #[test]
    fn train_model_dispatch() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i % 2) as f64, (i % 3 == 0) as u8 as f64])
            .collect();
        let labels = (0..20).map(|i| (i % 2) as u8 * 3).collect();
        let d = Dataset::from_rows(&rows, labels).unwrap();
        let cfg = TrainConfig {
            forest: TrainParams {
                n_trees: 5,
                ..TrainParams::default()
            },
            ..TrainConfig::default()
        };
        for kind in ClassifierKind::ALL {
            let m = train_model(kind, &d, &cfg).unwrap();
            assert_eq!(m.kind(), kind.as_str());
            assert_eq!(m.predict(&[1.0, 0.0]).unwrap().class, 3, "{kind}");
            assert_eq!(m.predict(&[0.0, 1.0]).unwrap().class, 0, "{kind}");
        }
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(2, vec![0.0; 4], vec![0, 1]).is_ok());
        assert!(matches!(
            Dataset::new(2, vec![0.0; 3], vec![0, 1]),
            Err(ClassifierError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Dataset::new(1, vec![0.0], vec![10]),
            Err(ClassifierError::LabelOutOfRange(10))
        ));
        assert!(matches!(
            Dataset::from_rows(&[vec![0.0, 1.0], vec![1.0]], vec![0, 0]),
            Err(ClassifierError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn subset_and_classes() {
        let d = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![7, 2, 7]).unwrap();
        let s = d.subset(&[2, 2, 1]);
        assert_eq!(s.features(), &[2.0, 2.0, 1.0]);
        assert_eq!(s.labels(), &[7, 7, 2]);
        assert_eq!(d.classes(), vec![2, 7]);
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[5.0]), 0);
    }

    #[test]
    fn default_features_per_split() {
        assert_eq!(TrainParams::default().features_per_split_for(675), 26);
        assert_eq!(TrainParams::default().features_per_split_for(4), 2);
    }
}
