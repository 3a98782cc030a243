//! One-vs-rest linear SVM trained with Pegasos-style primal SGD.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, check_dim, softmax, ClassifierError, Dataset, Prediction, Result};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub epochs: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            epochs: 50,
            lambda: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    dim: usize,
    lambda: f64,
    classes: Vec<u8>,
    /// One row per entry of `classes`: `dim` weights followed by the bias.
    weights: Vec<Vec<f64>>,
}

/// `w` is stored as `scale * v` so the per-step shrink is O(1).
struct ScaledVec {
    v: Vec<f64>,
    scale: f64,
}

impl ScaledVec {
    fn dot_augmented(&self, x: &[f64]) -> f64 {
        let dim = x.len();
        let s: f64 = self.v[..dim].iter().zip(x).map(|(a, b)| a * b).sum();
        self.scale * (s + self.v[dim])
    }

    fn materialize(&self) -> Vec<f64> {
        self.v.iter().map(|&a| a * self.scale).collect()
    }
}

/// Trains one binary SVM per class present in `data`. The bias is an extra
/// weight on a constant 1 feature and is regularized with the rest.
pub fn svm_train(data: &Dataset, params: &SvmParams) -> Result<SvmModel> {
    data.require_nonempty()?;
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        return Err(ClassifierError::InvalidParams(format!(
            "lambda {} must be positive",
            params.lambda
        )));
    }
    let classes = data.classes();
    if classes.len() < 2 {
        return Err(ClassifierError::SingleClass);
    }
    let dim = data.dim();
    let mut ws: Vec<ScaledVec> = classes
        .iter()
        .map(|_| ScaledVec {
            v: vec![0.0; dim + 1],
            scale: 1.0,
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut t = 0u64;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (params.lambda * t as f64);
            let x = data.row(i);
            let label = data.label(i);
            for (w, &class) in ws.iter_mut().zip(&classes) {
                let y = if label == class { 1.0 } else { -1.0 };
                let margin = y * w.dot_augmented(x);
                // w <- (1 - eta*lambda) w, which is exactly zero at t = 1.
                if t == 1 {
                    w.v.iter_mut().for_each(|a| *a = 0.0);
                    w.scale = 1.0;
                } else {
                    w.scale *= 1.0 - 1.0 / t as f64;
                }
                if margin < 1.0 {
                    let step = eta * y / w.scale;
                    for (a, &b) in w.v[..dim].iter_mut().zip(x) {
                        *a += step * b;
                    }
                    w.v[dim] += step;
                }
                if w.scale < 1e-12 {
                    w.v = w.materialize();
                    w.scale = 1.0;
                }
            }
        }
    }

    Ok(SvmModel {
        dim,
        lambda: params.lambda,
        classes,
        weights: ws.iter().map(ScaledVec::materialize).collect(),
    })
}

impl SvmModel {
    pub fn from_parts(
        dim: usize,
        lambda: f64,
        classes: Vec<u8>,
        weights: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if classes.len() != weights.len() || classes.len() < 2 {
            return Err(ClassifierError::Corrupt(
                "SVM needs one weight row per class, at least two".into(),
            ));
        }
        if weights.iter().any(|w| w.len() != dim + 1) {
            return Err(ClassifierError::Corrupt(format!(
                "SVM weight rows must have {} entries",
                dim + 1
            )));
        }
        if classes.iter().any(|&c| c as usize >= NUM_CLASSES)
            || !classes.windows(2).all(|p| p[0] < p[1])
        {
            return Err(ClassifierError::Corrupt(
                "SVM classes must be sorted and within 0..=9".into(),
            ));
        }
        Ok(Self {
            dim,
            lambda,
            classes,
            weights,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    fn score(&self, w: &[f64], x: &[f64]) -> f64 {
        w[..self.dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[self.dim]
    }

    /// Per-class decision values `w_k·x + b_k`, in `classes` order.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x)?;
        Ok(self.weights.iter().map(|w| self.score(w, x)).collect())
    }

    /// Votes hold raw decision values (zero for unseen classes); confidence
    /// is the softmax weight of the winner.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let scores = self.scores(x)?;
        let best = argmax(&scores);
        let mut votes = vec![0.0; NUM_CLASSES];
        for (&c, &s) in self.classes.iter().zip(&scores) {
            votes[c as usize] = s;
        }
        Ok(Prediction {
            class: self.classes[best],
            confidence: softmax(&scores)[best],
            votes,
        })
    }

    /// Sum over the one-vs-rest problems of
    /// `λ/2·‖w‖² + mean(max(0, 1 − y·(w·x + b)))`.
    pub fn objective(&self, data: &Dataset) -> f64 {
        let n = data.len() as f64;
        self.weights
            .iter()
            .zip(&self.classes)
            .map(|(w, &class)| {
                let reg = 0.5 * self.lambda * w.iter().map(|a| a * a).sum::<f64>();
                let hinge: f64 = data
                    .rows()
                    .zip(data.labels())
                    .map(|(x, &l)| {
                        let y = if l == class { 1.0 } else { -1.0 };
                        (1.0 - y * self.score(w, x)).max(0.0)
                    })
                    .sum();
                reg + hinge / n
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_dataset(seed: u64, n: usize, dim: usize, classes: u8) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let c = rng.random_range(0..classes);
            rows.push(
                (0..dim)
                    .map(|j| {
                        (rng.random_bool(if j % classes as usize == c as usize {
                            0.8
                        } else {
                            0.2
                        })) as u8 as f64
                    })
                    .collect(),
            );
            labels.push(c);
        }
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn separable_one_dimensional() {
        let rows: Vec<Vec<f64>> = [-3.0, -2.0, -1.5, -1.0, 1.0, 1.5, 2.0, 3.0]
            .iter()
            .map(|&v| vec![v])
            .collect();
        let d = Dataset::from_rows(&rows, vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let m = svm_train(
            &d,
            &SvmParams {
                lambda: 1e-2,
                ..SvmParams::default()
            },
        )
        .unwrap();
        for i in 0..d.len() {
            assert_eq!(m.predict(d.row(i)).unwrap().class, d.label(i));
        }
    }

    #[test]
    fn deterministic_weights() {
        let d = random_dataset(1, 60, 8, 3);
        let p = SvmParams {
            epochs: 5,
            seed: 3,
            ..SvmParams::default()
        };
        assert_eq!(svm_train(&d, &p).unwrap(), svm_train(&d, &p).unwrap());
    }

    #[test]
    fn objective_decreases_with_training() {
        let d = random_dataset(2, 200, 20, 4);
        let after_one = svm_train(
            &d,
            &SvmParams {
                epochs: 1,
                seed: 7,
                ..SvmParams::default()
            },
        )
        .unwrap();
        let after_fifty = svm_train(
            &d,
            &SvmParams {
                epochs: 50,
                seed: 7,
                ..SvmParams::default()
            },
        )
        .unwrap();
        let (j1, j50) = (after_one.objective(&d), after_fifty.objective(&d));
        assert!(j50 < j1, "{j1} -> {j50}");
    }

    #[test]
    fn single_class_rejected() {
        let d = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![4, 4]).unwrap();
        assert!(matches!(
            svm_train(&d, &SvmParams::default()),
            Err(ClassifierError::SingleClass)
        ));
    }

    #[test]
    fn score_ties_go_to_smaller_class() {
        let m = SvmModel::from_parts(1, 1e-4, vec![3, 6], vec![vec![0.0, 1.0], vec![0.0, 1.0]])
            .unwrap();
        let p = m.predict(&[5.0]).unwrap();
        assert_eq!(p.class, 3);
        assert!((p.confidence - 0.5).abs() < 1e-12);
    }
}
