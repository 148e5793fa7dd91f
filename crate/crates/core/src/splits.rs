//! Seeded k-fold assignments with a validation carve-out.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seeds: Vec<u64>,
    pub validation_fraction: f64,
}

impl Default for FoldPlan {
    fn default() -> Self {
        FoldPlan {
            k: 10,
            seeds: (0..10).collect(),
            validation_fraction: 0.10,
        }
    }
}

impl FoldPlan {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("fold count must be >= 2, got {}", self.k)));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        Ok(())
    }
}

/// One fold of one seed. Row indices are zero-based and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub fold: usize,
    pub train_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// `round(fraction * n)` with halves away from zero, at least 1.
pub fn validation_size(n_train_block: usize, fraction: f64) -> usize {
    ((fraction * n_train_block as f64).round() as usize).max(1)
}

/// Shuffle `0..n` and cut it into `k` test blocks whose sizes differ by at
/// most one. Validation rows for fold `f` are drawn from that fold's training
/// block with a generator seeded by `derive_seed(seed, [f])`.
pub fn make_folds(n: usize, plan: &FoldPlan, seed: u64) -> Result<Vec<SplitAssignment>> {
    plan.validate()?;
    let k = plan.k;
    if n < k {
        return Err(Error::TooFewRows { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed));

    let base = n / k;
    let extra = n % k;
    let mut blocks = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        blocks.push(&order[start..start + len]);
        start += len;
    }

    let mut out = Vec::with_capacity(k);
    for (f, block) in blocks.iter().enumerate() {
        let mut test_rows = block.to_vec();
        test_rows.sort_unstable();
        let mut in_test = vec![false; n];
        for &r in &test_rows {
            in_test[r] = true;
        }
        let mut train_block: Vec<usize> = (0..n).filter(|&r| !in_test[r]).collect();
        let n_val = validation_size(train_block.len(), plan.validation_fraction);
        if n_val >= train_block.len() {
            return Err(Error::TooFewRows { n, k });
        }
        train_block.shuffle(&mut rng(derive_seed(seed, &[f as u64])));
        let mut validation_rows = train_block[..n_val].to_vec();
        let mut train_rows = train_block[n_val..].to_vec();
        validation_rows.sort_unstable();
        train_rows.sort_unstable();
        out.push(SplitAssignment {
            seed,
            fold: f,
            train_rows,
            validation_rows,
            test_rows,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plan(k: usize) -> FoldPlan {
        FoldPlan {
            k,
            ..FoldPlan::default()
        }
    }

    #[test]
    fn leave_one_out_shape() {
        let folds = make_folds(10, &plan(10), 3).unwrap();
        assert_eq!(folds.len(), 10);
        for f in &folds {
            assert_eq!(f.test_rows.len(), 1);
            // 9 training-block rows -> round(0.9) = 1 validation row
            assert_eq!(f.validation_rows.len(), 1);
            assert_eq!(f.train_rows.len(), 8);
        }
    }

    #[test]
    fn hundred_rows_ten_folds() {
        for f in make_folds(100, &plan(10), 0).unwrap() {
            assert_eq!(f.test_rows.len(), 10);
            assert_eq!(f.validation_rows.len(), 9);
            assert_eq!(f.train_rows.len(), 81);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(
            make_folds(57, &plan(5), 11).unwrap(),
            make_folds(57, &plan(5), 11).unwrap()
        );
    }

    #[test]
    fn seed_changes_assignment() {
        let reference = make_folds(40, &plan(4), 0).unwrap();
        let changed = (1..=10)
            .filter(|&s| make_folds(40, &plan(4), s).unwrap() != reference)
            .count();
        assert_eq!(changed, 10);
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            make_folds(4, &plan(5), 0),
            Err(Error::TooFewRows { n: 4, k: 5 })
        ));
    }

    #[test]
    fn plan_validation() {
        assert!(FoldPlan { k: 1, ..FoldPlan::default() }.validate().is_err());
        assert!(FoldPlan {
            validation_fraction: 1.0,
            ..FoldPlan::default()
        }
        .validate()
        .is_err());
        assert!(FoldPlan {
            seeds: vec![1, 1],
            ..FoldPlan::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn rounding_half_away_from_zero() {
        assert_eq!(validation_size(25, 0.1), 3);
        assert_eq!(validation_size(35, 0.1), 4);
        assert_eq!(validation_size(3, 0.1), 1);
    }

    proptest! {
        #[test]
        fn folds_partition_rows(n in 2usize..300, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(n >= k);
            let folds = match make_folds(n, &plan(k), seed) {
                Ok(f) => f,
                // tiny training blocks cannot host a validation carve-out
                Err(_) => return Ok(()),
            };
            let mut test_cover = vec![0usize; n];
            let sizes: Vec<usize> = folds.iter().map(|f| f.test_rows.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for f in &folds {
                let mut seen = vec![0usize; n];
                for &r in f.train_rows.iter().chain(&f.validation_rows).chain(&f.test_rows) {
                    seen[r] += 1;
                }
                prop_assert!(seen.iter().all(|&c| c == 1));
                for &r in &f.test_rows {
                    test_cover[r] += 1;
                }
                let block = n - f.test_rows.len();
                prop_assert_eq!(f.validation_rows.len(), validation_size(block, 0.1));
            }
            prop_assert!(test_cover.iter().all(|&c| c == 1));
        }
    }
}
