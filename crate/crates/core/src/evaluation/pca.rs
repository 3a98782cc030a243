use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{EvaluationError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Unit vectors, strongest first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Flips `v` so that its largest-magnitude entry (first one on ties) is
/// positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top-`k` principal components of `rows` from the eigendecomposition of the
/// sample covariance (divisor N−1).
pub fn pca_fit(rows: &[&[f64]], k: usize) -> Result<PcaModel> {
    let n = rows.len();
    if n < 2 {
        return Err(EvaluationError::TooFewSamples(n));
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(EvaluationError::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    if k == 0 || k > (n - 1).min(dim) {
        return Err(EvaluationError::TooManyComponents { k, n, dim });
    }

    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, &v) in mean.iter_mut().zip(*r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &i in &order[..k] {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        fix_sign(&mut v);
        components.push(v);
        explained_variance.push(eig.eigenvalues[i].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

/// `(x − mean) · componentsᵀ` for each row.
pub fn pca_project(model: &PcaModel, rows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|r| {
            if r.len() != model.dim() {
                return Err(EvaluationError::DimensionMismatch {
                    expected: model.dim(),
                    actual: r.len(),
                });
            }
            Ok(model
                .components
                .iter()
                .map(|c| {
                    c.iter()
                        .zip(*r)
                        .zip(&model.mean)
                        .map(|((a, x), m)| a * (x - m))
                        .sum()
                })
                .collect())
        })
        .collect()
}
