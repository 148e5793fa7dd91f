use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use crate::linalg::Matrix;
use crate::rng::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub estimators: usize,
    /// Per-tree settings; a `None` feature budget becomes `floor(sqrt(F))`.
    pub tree: TreeParams,
    pub bootstrap: bool,
}

/// Bagged CART trees. Each tree casts a hard vote (leaf fraction `>= 0.5`)
/// and the score is the share of positive votes.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(x: &Matrix, y: &[bool], params: &ForestParams, seed: u64) -> Self {
        let n = x.rows();
        let mut tree_params = params.tree;
        if tree_params.max_features.is_none() {
            tree_params.max_features = Some(((x.cols() as f64).sqrt().floor() as usize).max(1));
        }
        let trees = (0..params.estimators.max(1))
            .map(|t| {
                let mut r = rng(derive_seed(seed, &[t as u64]));
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| r.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(x, y, &rows, &tree_params, &mut r)
            })
            .collect();
        RandomForest { trees }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let m = self.trees.len() as f64;
        x.iter_rows()
            .map(|row| {
                self.trees
                    .iter()
                    .filter(|t| t.score_row(row) >= 0.5)
                    .count() as f64
                    / m
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_is_vote_share() {
        let trees = (0..10)
            .map(|i| DecisionTree::constant(if i < 7 { 0.8 } else { 0.2 }))
            .collect();
        let f = RandomForest { trees };
        let x = Matrix::zeros(1, 2);
        assert!((f.predict(&x)[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn single_unbagged_tree_matches_a_tree() {
        let mut r = rng(2);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<bool> = rows.iter().map(|v| v[0] - v[2] + r.gen_range(-0.3..0.3) > 0.0).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let tree = TreeParams {
            max_depth: Some(4),
            min_samples_leaf: 2,
            max_features: Some(3),
        };
        let p = ForestParams {
            estimators: 1,
            tree,
            bootstrap: false,
        };
        let forest = RandomForest::fit(&x, &y, &p, 9);
        let all: Vec<usize> = (0..120).collect();
        let single = DecisionTree::fit(&x, &y, &all, &TreeParams { max_features: None, ..tree }, &mut rng(0));
        let votes: Vec<f64> = single
            .predict(&x)
            .iter()
            .map(|&s| f64::from(u8::from(s >= 0.5)))
            .collect();
        assert_eq!(forest.predict(&x), votes);
    }

    #[test]
    fn default_feature_budget_is_sqrt() {
        let x = Matrix::zeros(4, 9);
        let p = ForestParams {
            estimators: 3,
            tree: TreeParams::default(),
            bootstrap: true,
        };
        let f = RandomForest::fit(&x, &[true, false, true, false], &p, 0);
        assert_eq!(f.n_trees(), 3);
    }
}
