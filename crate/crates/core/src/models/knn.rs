use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// Minkowski distance with exponent 3.
    Minkowski,
    Euclidean,
    Manhattan,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 3] = [
        DistanceMetric::Minkowski,
        DistanceMetric::Euclidean,
        DistanceMetric::Manhattan,
    ];

    /// A monotone transform of the distance (the root is skipped).
    fn rank_distance(self, a: &[f64], b: &[f64]) -> f64 {
        let it = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            DistanceMetric::Minkowski => it.map(|d| d * d * d).sum(),
            DistanceMetric::Euclidean => it.map(|d| d * d).sum(),
            DistanceMetric::Manhattan => it.sum(),
        }
    }
}

/// k-nearest-neighbour classifier; the score is the positive fraction among
/// the `k` nearest training rows.
///
/// Rows tied with the k-th distance share the remaining slots pro rata, which
/// makes the score independent of training-row order.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    x: Matrix,
    y: Vec<bool>,
    k: usize,
    metric: DistanceMetric,
}

impl Knn {
    pub fn fit(x: &Matrix, y: &[bool], k: usize, metric: DistanceMetric) -> Self {
        Knn {
            x: x.clone(),
            y: y.to_vec(),
            k: k.max(1),
            metric,
        }
    }

    fn score_one(&self, q: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let n = self.x.rows();
        let k = self.k.min(n);
        scratch.clear();
        scratch.extend(self.x.iter_rows().map(|r| self.metric.rank_distance(q, r)));
        let dists = scratch.clone();
        let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
        let kth = *kth;
        let (mut closer, mut closer_pos, mut tied, mut tied_pos) = (0usize, 0usize, 0usize, 0usize);
        for (d, &y) in dists.iter().zip(&self.y) {
            if *d < kth {
                closer += 1;
                closer_pos += usize::from(y);
            } else if *d == kth {
                tied += 1;
                tied_pos += usize::from(y);
            }
        }
        let slots = (k - closer) as f64;
        (closer_pos as f64 + slots * tied_pos as f64 / tied as f64) / k as f64
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut scratch = Vec::with_capacity(self.x.rows());
        x.iter_rows().map(|q| self.score_one(q, &mut scratch)).collect()
    }
}
