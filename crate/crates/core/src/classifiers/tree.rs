//! CART classification tree with Gini impurity.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_dim, ClassifierError, Dataset, Prediction, Result, TrainParams};
use crate::NUM_CLASSES;

/// Split threshold for binary features.
const BINARY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: u8,
        class_counts: [u32; NUM_CLASSES],
    },
}

/// Nodes live in a flat arena in preorder; children always have larger
/// indices than their parent and the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    feature_dim: usize,
}

/// Majority class with ties to the smallest index.
pub(crate) fn majority(counts: &[u32; NUM_CLASSES]) -> u8 {
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    best as u8
}

/// Exact split quality `Σ_side Σ_k c_k² / n_side`, kept as a fraction so that
/// comparisons involve no rounding. Larger is purer.
#[derive(Debug, Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of_node(counts: &[u32; NUM_CLASSES], n: u64) -> Self {
        Self {
            num: sum_sq(counts),
            den: n as u128,
        }
    }

    fn of_split(left: &[u32; NUM_CLASSES], nl: u64, right: &[u32; NUM_CLASSES], nr: u64) -> Self {
        let (nl, nr) = (nl as u128, nr as u128);
        Self {
            num: sum_sq(left) * nr + sum_sq(right) * nl,
            den: nl * nr,
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

fn sum_sq(counts: &[u32; NUM_CLASSES]) -> u128 {
    counts.iter().map(|&c| (c as u128) * (c as u128)).sum()
}

/// Grows one tree on all rows of `data`, drawing per-node feature subsets
/// from `rng`.
pub fn train_tree<R: Rng + ?Sized>(
    data: &Dataset,
    params: &TrainParams,
    rng: &mut R,
) -> Result<DecisionTree> {
    data.require_nonempty()?;
    params.validate(data.dim())?;
    let indices: Vec<usize> = (0..data.len()).collect();
    Ok(grow(data, indices, params, rng))
}

pub(crate) fn grow<R: Rng + ?Sized>(
    data: &Dataset,
    indices: Vec<usize>,
    params: &TrainParams,
    rng: &mut R,
) -> DecisionTree {
    let mut builder = Builder {
        data,
        params,
        features_per_split: params.features_per_split_for(data.dim()),
        nodes: Vec::new(),
    };
    builder.build(indices, 0, rng);
    DecisionTree {
        nodes: builder.nodes,
        feature_dim: data.dim(),
    }
}

struct Builder<'a> {
    data: &'a Dataset,
    params: &'a TrainParams,
    features_per_split: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, indices: &[usize]) -> [u32; NUM_CLASSES] {
        let mut c = [0u32; NUM_CLASSES];
        for &i in indices {
            c[self.data.label(i) as usize] += 1;
        }
        c
    }

    fn build<R: Rng + ?Sized>(&mut self, indices: Vec<usize>, depth: usize, rng: &mut R) -> usize {
        let counts = self.counts(&indices);
        let n = indices.len();
        let id = self.nodes.len();
        let leaf = Node::Leaf {
            class: majority(&counts),
            class_counts: counts,
        };
        self.nodes.push(leaf);

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let too_deep = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || n < self.params.min_samples_split || too_deep {
            return id;
        }

        let Some(feature) = self.best_split(&indices, &counts, rng) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| self.data.row(i)[feature] <= BINARY_THRESHOLD);
        let left = self.build(left, depth + 1, rng);
        let right = self.build(right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold: BINARY_THRESHOLD,
            left,
            right,
        };
        id
    }

    /// Best sampled feature whose split strictly lowers the weighted Gini
    /// impurity. Equal candidates resolve to the smaller feature index.
    fn best_split<R: Rng + ?Sized>(
        &self,
        indices: &[usize],
        counts: &[u32; NUM_CLASSES],
        rng: &mut R,
    ) -> Option<usize> {
        let n = indices.len() as u64;
        let parent = Purity::of_node(counts, n);
        let mut sampled =
            rand::seq::index::sample(rng, self.data.dim(), self.features_per_split).into_vec();
        sampled.sort_unstable();

        let mut best: Option<(usize, Purity)> = None;
        for f in sampled {
            let mut right = [0u32; NUM_CLASSES];
            let mut nr = 0u64;
            for &i in indices {
                if self.data.row(i)[f] > BINARY_THRESHOLD {
                    right[self.data.label(i) as usize] += 1;
                    nr += 1;
                }
            }
            let nl = n - nr;
            if nl == 0 || nr == 0 {
                continue;
            }
            let mut left = *counts;
            for k in 0..NUM_CLASSES {
                left[k] -= right[k];
            }
            let purity = Purity::of_split(&left, nl, &right, nr);
            if purity.cmp(&parent) != Ordering::Greater {
                continue;
            }
            if best
                .as_ref()
                .is_none_or(|(_, b)| purity.cmp(b) == Ordering::Greater)
            {
                best = Some((f, purity));
            }
        }
        best.map(|(f, _)| f)
    }
}

impl DecisionTree {
    /// Builds a tree from an arena, checking the structural invariants.
    pub fn from_nodes(nodes: Vec<Node>, feature_dim: usize) -> Result<Self> {
        let corrupt = |m: String| Err(ClassifierError::Corrupt(m));
        if nodes.is_empty() {
            return corrupt("tree has no nodes".into());
        }
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    left,
                    right,
                    threshold,
                } => {
                    if feature >= feature_dim {
                        return corrupt(format!("node {i}: feature {feature} >= {feature_dim}"));
                    }
                    if !threshold.is_finite() {
                        return corrupt(format!("node {i}: non-finite threshold"));
                    }
                    // Children after the parent rules out cycles.
                    if left <= i
                        || right <= i
                        || left >= nodes.len()
                        || right >= nodes.len()
                        || left == right
                    {
                        return corrupt(format!("node {i}: bad child links {left}/{right}"));
                    }
                }
                Node::Leaf { class, .. } => {
                    if class as usize >= NUM_CLASSES {
                        return corrupt(format!("node {i}: class {class}"));
                    }
                }
            }
        }
        Ok(Self { nodes, feature_dim })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Routes `x` to its leaf. `x` must have `feature_dim` entries.
    pub(crate) fn leaf(&self, x: &[f64]) -> (u8, &[u32; NUM_CLASSES]) {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Leaf {
                    class,
                    class_counts,
                } => return (*class, class_counts),
            }
        }
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<u8> {
        check_dim(self.feature_dim, x)?;
        Ok(self.leaf(x).0)
    }

    /// Votes are the leaf's training class counts.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        check_dim(self.feature_dim, x)?;
        let (class, counts) = self.leaf(x);
        let total: u32 = counts.iter().sum();
        Ok(Prediction {
            class,
            votes: counts.iter().map(|&c| c as f64).collect(),
            confidence: if total == 0 {
                0.0
            } else {
                counts[class as usize] as f64 / total as f64
            },
        })
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn classes(&self) -> Vec<u8> {
        let mut seen = [false; NUM_CLASSES];
        for n in &self.nodes {
            if let Node::Leaf { class_counts, .. } = n {
                for (k, &c) in class_counts.iter().enumerate() {
                    seen[k] |= c > 0;
                }
            }
        }
        (0..NUM_CLASSES as u8)
            .filter(|&k| seen[k as usize])
            .collect()
    }
}
