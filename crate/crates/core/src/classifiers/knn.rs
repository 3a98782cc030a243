use serde::{Deserialize, Serialize};

use super::{check_dim, ClassifierError, Dataset, Prediction, Result};
use crate::NUM_CLASSES;

/// k-nearest-neighbours classifier; the model is the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub train: Dataset,
    pub k: usize,
}

impl KnnModel {
    pub fn new(train: Dataset, k: usize) -> Result<Self> {
        train.require_nonempty()?;
        if k == 0 {
            return Err(ClassifierError::InvalidParams(
                "k must be at least 1".into(),
            ));
        }
        if k > train.len() {
            return Err(ClassifierError::KTooLarge { k, n: train.len() });
        }
        Ok(Self { train, k })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        knn_predict(&self.train, x, self.k)
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Euclidean kNN. Distance ties prefer the lower sample index; vote ties
/// prefer the smaller summed distance, then the smaller class.
pub fn knn_predict(train: &Dataset, x: &[f64], k: usize) -> Result<Prediction> {
    train.require_nonempty()?;
    check_dim(train.dim(), x)?;
    if k == 0 {
        return Err(ClassifierError::InvalidParams(
            "k must be at least 1".into(),
        ));
    }
    if k > train.len() {
        return Err(ClassifierError::KTooLarge { k, n: train.len() });
    }

    let mut dists: Vec<(f64, usize)> = train
        .rows()
        .enumerate()
        .map(|(i, row)| (squared_distance(row, x), i))
        .collect();
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dists.len() {
        dists.select_nth_unstable_by(k - 1, by_dist);
        dists.truncate(k);
    }
    // Fixed summation order keeps the distance tie-break reproducible.
    dists.sort_unstable_by(by_dist);

    let mut votes = [0usize; NUM_CLASSES];
    let mut summed = [0.0f64; NUM_CLASSES];
    for &(d2, i) in &dists {
        let c = train.label(i) as usize;
        votes[c] += 1;
        summed[c] += d2.sqrt();
    }
    let class = (0..NUM_CLASSES)
        .filter(|&c| votes[c] > 0)
        .min_by(|&a, &b| {
            votes[b]
                .cmp(&votes[a])
                .then(summed[a].total_cmp(&summed[b]))
                .then(a.cmp(&b))
        })
        .unwrap_or(0);
    Ok(Prediction {
        class: class as u8,
        confidence: votes[class] as f64 / k as f64,
        votes: votes.iter().map(|&v| v as f64).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force oracle: full sort by (distance, index), then tally with
    /// the same tie rules written out longhand.
    fn oracle(train: &Dataset, x: &[f64], k: usize) -> u8 {
        let mut all: Vec<(f64, usize)> = (0..train.len())
            .map(|i| {
                let d: f64 = train
                    .row(i)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                (d.sqrt(), i)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut best: Option<(usize, f64, u8)> = None;
        for c in 0..10u8 {
            let members: Vec<f64> = all[..k]
                .iter()
                .filter(|(_, i)| train.label(*i) == c)
                .map(|(d, _)| *d)
                .collect();
            if members.is_empty() {
                continue;
            }
            let (n, s) = (members.len(), members.iter().sum::<f64>());
            let better = match best {
                None => true,
                Some((bn, bs, _)) => n > bn || (n == bn && s < bs),
            };
            if better {
                best = Some((n, s, c));
            }
        }
        best.unwrap().2
    }

    #[test]
    fn exact_match_with_k1() {
        let d = Dataset::from_rows(
            &[vec![0.0, 0.0], vec![5.0, 5.0], vec![1.0, 9.0]],
            vec![1, 2, 3],
        )
        .unwrap();
        assert_eq!(knn_predict(&d, &[5.0, 5.0], 1).unwrap().class, 2);
    }

    #[test]
    fn identical_points() {
        let d = Dataset::from_rows(&vec![vec![1.0, 1.0]; 5], vec![3; 5]).unwrap();
        let p = knn_predict(&d, &[0.0, 0.0], 5).unwrap();
        assert_eq!((p.class, p.confidence), (3, 1.0));
    }

    #[test]
    fn vote_tie_prefers_closer_class() {
        // Two 7s far away, two 4s close: 2-2 vote, 4s win on distance.
        let d = Dataset::from_rows(
            &[vec![10.0], vec![11.0], vec![1.0], vec![2.0]],
            vec![7, 7, 4, 4],
        )
        .unwrap();
        assert_eq!(knn_predict(&d, &[0.0], 4).unwrap().class, 4);
        // Equal distances: smaller class.
        let d = Dataset::from_rows(&[vec![1.0], vec![-1.0]], vec![9, 6]).unwrap();
        assert_eq!(knn_predict(&d, &[0.0], 2).unwrap().class, 6);
    }

    #[test]
    fn distance_tie_prefers_lower_index() {
        let d = Dataset::from_rows(&[vec![1.0], vec![-1.0], vec![1.0]], vec![5, 2, 8]).unwrap();
        assert_eq!(knn_predict(&d, &[0.0], 1).unwrap().class, 5);
    }

    #[test]
    fn errors() {
        let d = Dataset::from_rows(&[vec![1.0]], vec![5]).unwrap();
        assert!(matches!(
            knn_predict(&d, &[0.0], 2),
            Err(ClassifierError::KTooLarge { k: 2, n: 1 })
        ));
        assert!(matches!(
            knn_predict(&d, &[0.0, 1.0], 1),
            Err(ClassifierError::DimensionMismatch { .. })
        ));
        assert!(KnnModel::new(d, 0).is_err());
    }

    #[test]
    fn matches_sort_oracle_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..40 {
            let n = rng.random_range(5..=200);
            let dim = rng.random_range(1..6);
            // Small integer grid so that distance ties actually occur.
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.random_range(0..3) as f64).collect())
                .collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let d = Dataset::from_rows(&rows, labels).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(0..3) as f64).collect();
                let k = rng.random_range(1..=n.min(9));
                assert_eq!(
                    knn_predict(&d, &x, k).unwrap().class,
                    oracle(&d, &x, k),
                    "trial {trial}"
                );
            }
        }
    }
}
