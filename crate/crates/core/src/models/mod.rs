//! Classifier zoo, hyperparameter sampling and validation-AUC model selection.
//!
//! Every model emits scores in `[0, 1]` that are read as the probability of
//! the positive class.

mod forest;
mod knn;
mod logit;
mod mlp;
mod nb;
mod search;
mod tree;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use forest::{ForestParams, RandomForest};
pub use knn::{DistanceMetric, Knn};
pub use logit::{LogisticRegression, LogitParams};
pub use mlp::{Mlp, MlpParams};
pub use nb::GaussianNb;
pub use search::{search, select_best_model, DrawOutcome, SearchReport, SearchResult};
pub use tree::{DecisionTree, TreeParams};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logit,
    Mlp,
    Knn,
    Rf,
    Tree,
    Nb,
}

impl ModelKind {
    /// Canonical order; also the row-block order of metrics matrices.
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Logit,
        ModelKind::Mlp,
        ModelKind::Knn,
        ModelKind::Rf,
        ModelKind::Tree,
        ModelKind::Nb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logit => "logit",
            ModelKind::Mlp => "mlp",
            ModelKind::Knn => "knn",
            ModelKind::Rf => "rf",
            ModelKind::Tree => "tree",
            ModelKind::Nb => "nb",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }

    /// Parse a comma separated list such as `logit,mlp`.
    pub fn parse_list(s: &str) -> Result<Vec<ModelKind>> {
        let mut kinds: Vec<ModelKind> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        kinds.sort();
        kinds.dedup();
        if kinds.is_empty() {
            return Err(Error::Config("no model kinds selected".into()));
        }
        Ok(kinds)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model kind `{s}` (expected one of logit, mlp, knn, rf, tree, nb)"
                ))
            })
    }
}

/// One hyperparameter configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HyperDraw {
    Logit(LogitParams),
    Mlp(MlpParams),
    Knn {
        neighbors: usize,
        metric: DistanceMetric,
    },
    Rf(ForestParams),
    Tree(TreeParams),
    Nb,
}

impl HyperDraw {
    pub fn kind(&self) -> ModelKind {
        match self {
            HyperDraw::Logit(_) => ModelKind::Logit,
            HyperDraw::Mlp(_) => ModelKind::Mlp,
            HyperDraw::Knn { .. } => ModelKind::Knn,
            HyperDraw::Rf(_) => ModelKind::Rf,
            HyperDraw::Tree(_) => ModelKind::Tree,
            HyperDraw::Nb => ModelKind::Nb,
        }
    }
}

pub const LOGIT_C_RANGE: (f64, f64) = (0.1, 10.0);
pub const MLP_WIDTH_RANGE: (usize, usize) = (1, 10);
pub const KNN_NEIGHBOR_RANGE: (usize, usize) = (3, 20);
pub const RF_ESTIMATOR_RANGE: (usize, usize) = (10, 50);
pub const DEPTH_RANGE: (usize, usize) = (5, 50);
pub const MIN_LEAF_RANGE: (usize, usize) = (1, 10);

/// Draw `count` random configurations for `kind`; integer ranges are inclusive.
pub fn sample_hypers(kind: ModelKind, count: usize, seed: u64) -> Vec<HyperDraw> {
    let mut r = rng(derive_seed(seed, &[0x4859_5045, kind.index()]));
    (0..count)
        .map(|_| match kind {
            ModelKind::Logit => HyperDraw::Logit(LogitParams {
                c: r.gen_range(LOGIT_C_RANGE.0..LOGIT_C_RANGE.1),
            }),
            ModelKind::Mlp => HyperDraw::Mlp(MlpParams::with_width(
                r.gen_range(MLP_WIDTH_RANGE.0..=MLP_WIDTH_RANGE.1),
            )),
            ModelKind::Knn => HyperDraw::Knn {
                neighbors: r.gen_range(KNN_NEIGHBOR_RANGE.0..=KNN_NEIGHBOR_RANGE.1),
                metric: DistanceMetric::ALL[r.gen_range(0..DistanceMetric::ALL.len())],
            },
            ModelKind::Rf => HyperDraw::Rf(ForestParams {
                estimators: r.gen_range(RF_ESTIMATOR_RANGE.0..=RF_ESTIMATOR_RANGE.1),
                tree: TreeParams {
                    max_depth: Some(r.gen_range(DEPTH_RANGE.0..=DEPTH_RANGE.1)),
                    min_samples_leaf: r.gen_range(MIN_LEAF_RANGE.0..=MIN_LEAF_RANGE.1),
                    max_features: None,
                },
                bootstrap: true,
            }),
            ModelKind::Tree => HyperDraw::Tree(TreeParams {
                max_depth: Some(r.gen_range(DEPTH_RANGE.0..=DEPTH_RANGE.1)),
                min_samples_leaf: r.gen_range(MIN_LEAF_RANGE.0..=MIN_LEAF_RANGE.1),
                max_features: None,
            }),
            ModelKind::Nb => HyperDraw::Nb,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub enum Fitted {
    Logit(LogisticRegression),
    Mlp(Mlp),
    Knn(Knn),
    Rf(RandomForest),
    Tree(DecisionTree),
    Nb(GaussianNb),
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub draw: HyperDraw,
    pub seed: u64,
    pub n_features: usize,
    pub fitted: Fitted,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.draw.kind()
    }
}

fn check_training_data(kind: ModelKind, x: &Matrix, y: &[bool]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch(x.rows(), y.len()));
    }
    if x.rows() == 0 {
        return Err(Error::Training("empty training set".into()));
    }
    if !x.is_finite() {
        return Err(Error::Training("non-finite feature value".into()));
    }
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        match kind {
            ModelKind::Logit | ModelKind::Mlp | ModelKind::Nb => return Err(Error::SingleClass),
            _ => log::warn!("{kind}: training labels contain a single class"),
        }
    }
    Ok(())
}

/// Fit one configuration. `seed` drives every random choice inside the fit.
pub fn train(draw: &HyperDraw, x: &Matrix, y: &[bool], seed: u64) -> Result<TrainedModel> {
    check_training_data(draw.kind(), x, y)?;
    let fitted = match draw {
        HyperDraw::Logit(p) => Fitted::Logit(LogisticRegression::fit(x, y, p)?),
        HyperDraw::Mlp(p) => Fitted::Mlp(Mlp::fit(x, y, p, seed)?),
        HyperDraw::Knn { neighbors, metric } => Fitted::Knn(Knn::fit(x, y, *neighbors, *metric)),
        HyperDraw::Rf(p) => Fitted::Rf(RandomForest::fit(x, y, p, seed)),
        HyperDraw::Tree(p) => {
            let rows: Vec<usize> = (0..x.rows()).collect();
            Fitted::Tree(DecisionTree::fit(x, y, &rows, p, &mut rng(seed)))
        }
        HyperDraw::Nb => Fitted::Nb(GaussianNb::fit(x, y)?),
    };
    Ok(TrainedModel {
        draw: draw.clone(),
        seed,
        n_features: x.cols(),
        fitted,
    })
}

/// Positive-class scores for every row of `x`.
pub fn predict_scores(model: &TrainedModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.n_features {
        return Err(Error::Dimension {
            expected: model.n_features,
            actual: x.cols(),
        });
    }
    let scores = match &model.fitted {
        Fitted::Logit(m) => m.predict(x),
        Fitted::Mlp(m) => m.predict(x),
        Fitted::Knn(m) => m.predict(x),
        Fitted::Rf(m) => m.predict(x),
        Fitted::Tree(m) => m.predict(x),
        Fitted::Nb(m) => m.predict(x),
    };
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Training("model produced a non-finite score".into()));
    }
    Ok(scores)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed: u64) -> (Matrix, Vec<bool>) {
        let mut r = rng(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = r.gen_range(-2.0..2.0);
            let b: f64 = r.gen_range(-2.0..2.0);
            rows.push(vec![a, b, a * b]);
            y.push(a + 0.5 * b + r.gen_range(-0.5..0.5) > 0.0);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn draws_respect_ranges() {
        for seed in 0..50 {
            for d in sample_hypers(ModelKind::Knn, 3, seed) {
                let HyperDraw::Knn { neighbors, .. } = d else { panic!() };
                assert!((3..=20).contains(&neighbors));
            }
            for d in sample_hypers(ModelKind::Logit, 30, seed) {
                let HyperDraw::Logit(p) = d else { panic!() };
                assert!(p.c >= 0.1 && p.c <= 10.0);
            }
            for d in sample_hypers(ModelKind::Mlp, 5, seed) {
                let HyperDraw::Mlp(p) = d else { panic!() };
                assert!((1..=10).contains(&p.width_multiplier));
                assert_eq!((p.epochs, p.batch_size, p.l2), (100, 64, 0.01));
            }
            for d in sample_hypers(ModelKind::Rf, 5, seed) {
                let HyperDraw::Rf(p) = d else { panic!() };
                assert!((10..=50).contains(&p.estimators));
                assert!((5..=50).contains(&p.tree.max_depth.unwrap()));
                assert!((1..=10).contains(&p.tree.min_samples_leaf));
            }
            for d in sample_hypers(ModelKind::Tree, 5, seed) {
                let HyperDraw::Tree(p) = d else { panic!() };
                assert!((5..=50).contains(&p.max_depth.unwrap()));
            }
        }
    }

    #[test]
    fn nb_draws_are_identical_and_empty() {
        let d = sample_hypers(ModelKind::Nb, 30, 1);
        assert_eq!(d.len(), 30);
        assert!(d.iter().all(|x| *x == HyperDraw::Nb));
    }

    #[test]
    fn draws_are_deterministic() {
        for kind in ModelKind::ALL {
            assert_eq!(sample_hypers(kind, 7, 3), sample_hypers(kind, 7, 3));
        }
        assert_ne!(
            sample_hypers(ModelKind::Logit, 3, 1),
            sample_hypers(ModelKind::Logit, 3, 2)
        );
    }

    #[test]
    fn every_kind_scores_in_unit_interval() {
        let (x, y) = toy(150, 5);
        let (xt, _) = toy(60, 6);
        for kind in ModelKind::ALL {
            let draw = if kind == ModelKind::Mlp {
                HyperDraw::Mlp(MlpParams {
                    epochs: 5,
                    ..MlpParams::with_width(1)
                })
            } else {
                sample_hypers(kind, 1, 0).remove(0)
            };
            let m = train(&draw, &x, &y, 9).unwrap();
            let s = predict_scores(&m, &xt).unwrap();
            assert!(s.iter().all(|v| (0.0..=1.0).contains(v)), "{kind}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = toy(120, 2);
        for kind in ModelKind::ALL {
            let draw = if kind == ModelKind::Mlp {
                HyperDraw::Mlp(MlpParams {
                    epochs: 3,
                    ..MlpParams::with_width(2)
                })
            } else {
                sample_hypers(kind, 1, 4).remove(0)
            };
            let a = predict_scores(&train(&draw, &x, &y, 17).unwrap(), &x).unwrap();
            let b = predict_scores(&train(&draw, &x, &y, 17).unwrap(), &x).unwrap();
            assert_eq!(a, b, "{kind}");
        }
    }

    #[test]
    fn single_class_rejected_for_parametric_kinds() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let y = [true, true];
        for kind in [ModelKind::Logit, ModelKind::Mlp, ModelKind::Nb] {
            let draw = sample_hypers(kind, 1, 0).remove(0);
            assert!(matches!(train(&draw, &x, &y, 0), Err(Error::SingleClass)));
        }
        let draw = sample_hypers(ModelKind::Tree, 1, 0).remove(0);
        assert!(train(&draw, &x, &y, 0).is_ok());
    }

    #[test]
    fn non_finite_features_rejected() {
        let x = Matrix::from_rows(&[vec![f64::NAN], vec![1.0]]).unwrap();
        let draw = sample_hypers(ModelKind::Knn, 1, 0).remove(0);
        assert!(train(&draw, &x, &[true, false], 0).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (x, y) = toy(40, 1);
        let m = train(&HyperDraw::Nb, &x, &y, 0).unwrap();
        let narrow = Matrix::zeros(2, 2);
        assert!(matches!(predict_scores(&m, &narrow), Err(Error::Dimension { .. })));
    }

    #[test]
    fn kind_lists_parse() {
        assert_eq!(
            ModelKind::parse_list("mlp, logit").unwrap(),
            vec![ModelKind::Logit, ModelKind::Mlp]
        );
        assert!(ModelKind::parse_list("lsvm").is_err());
    }
}
