use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{predict_scores, sample_hypers, train, HyperDraw, ModelKind};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::metrics::auc_or_imputed;
use crate::rng::derive_seed;

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawOutcome {
    pub index: usize,
    pub draw: HyperDraw,
    pub training_seed: u64,
    /// `None` when training or scoring failed.
    pub validation_auc: Option<f64>,
    pub error: Option<String>,
}

/// The winning configuration of one kind with its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub kind: ModelKind,
    pub winner: usize,
    pub validation_auc: f64,
    pub validation_scores: Vec<f64>,
    pub test_scores: Vec<f64>,
    pub outcomes: Vec<DrawOutcome>,
}

impl SearchResult {
    pub fn winning_draw(&self) -> &HyperDraw {
        &self.outcomes[self.winner].draw
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub seed: u64,
    pub fold: usize,
    /// In [`ModelKind::ALL`] order; kinds whose draws all failed are absent.
    pub results: Vec<SearchResult>,
    /// Kinds dropped because no draw completed, with the last error seen.
    pub excluded: Vec<(ModelKind, String)>,
}

/// Index of the largest AUC, earliest on ties; `None` entries are failed draws.
pub fn select_best_model(aucs: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, a) in aucs.iter().enumerate() {
        if let Some(a) = a.filter(|a| !a.is_nan()) {
            if best.map_or(true, |(_, b)| a > b) {
                best = Some((i, a));
            }
        }
    }
    best.map(|(i, _)| i)
}

type JobOutput = Result<(f64, Vec<f64>, Vec<f64>)>;

fn run_job(
    draw: &HyperDraw,
    seed: u64,
    train_xy: (&Matrix, &[bool]),
    validation_xy: (&Matrix, &[bool]),
    test_x: &Matrix,
) -> JobOutput {
    let model = train(draw, train_xy.0, train_xy.1, seed)?;
    let val = predict_scores(&model, validation_xy.0)?;
    let (auc, _) = auc_or_imputed(&val, validation_xy.1)?;
    let test = predict_scores(&model, test_x)?;
    Ok((auc, val, test))
}

/// Random search for every kind on one (seed, fold) split.
///
/// Draws depend on `(seed, kind)` only, so every fold of a seed explores the
/// same configurations. Draw `d` of kind `k` trains with seed
/// `derive_seed(seed, [fold, k, d])`. Jobs run on the current rayon pool;
/// the result does not depend on scheduling.
pub fn search(
    kinds: &[ModelKind],
    draws: usize,
    seed: u64,
    fold: usize,
    train_xy: (&Matrix, &[bool]),
    validation_xy: (&Matrix, &[bool]),
    test_x: &Matrix,
) -> SearchReport {
    let plans: Vec<(ModelKind, Vec<HyperDraw>)> = kinds
        .iter()
        .map(|&k| (k, sample_hypers(k, draws.max(1), seed)))
        .collect();
    let jobs: Vec<(usize, usize)> = plans
        .iter()
        .enumerate()
        .flat_map(|(p, (kind, ds))| {
            // nb has no hyperparameters: one fit stands for every draw
            let n = if *kind == ModelKind::Nb { 1 } else { ds.len() };
            (0..n).map(move |d| (p, d))
        })
        .collect();
    let training_seed =
        |kind: ModelKind, d: usize| derive_seed(seed, &[fold as u64, kind as u64, d as u64]);
    let outputs: Vec<JobOutput> = jobs
        .par_iter()
        .map(|&(p, d)| {
            let (kind, ds) = &plans[p];
            run_job(&ds[d], training_seed(*kind, d), train_xy, validation_xy, test_x)
        })
        .collect();

    let mut report = SearchReport {
        seed,
        fold,
        results: Vec::new(),
        excluded: Vec::new(),
    };
    let mut outputs = outputs.into_iter();
    for (kind, ds) in plans {
        let fits = if kind == ModelKind::Nb { 1 } else { ds.len() };
        let mut results: Vec<JobOutput> = outputs.by_ref().take(fits).collect();
        let outcomes: Vec<DrawOutcome> = ds
            .into_iter()
            .enumerate()
            .map(|(i, draw)| {
                let r = &results[i.min(fits - 1)];
                DrawOutcome {
                    index: i,
                    draw,
                    training_seed: training_seed(kind, i.min(fits - 1)),
                    validation_auc: r.as_ref().ok().map(|o| o.0),
                    error: r.as_ref().err().map(|e| e.to_string()),
                }
            })
            .collect();
        let aucs: Vec<Option<f64>> = outcomes.iter().map(|o| o.validation_auc).collect();
        match select_best_model(&aucs) {
            Some(w) => {
                let (auc, val, test) = std::mem::replace(&mut results[w.min(fits - 1)], Ok(Default::default()))
                    .expect("winner completed");
                report.results.push(SearchResult {
                    kind,
                    winner: w,
                    validation_auc: auc,
                    validation_scores: val,
                    test_scores: test,
                    outcomes,
                });
            }
            None => {
                let last = outcomes
                    .iter()
                    .rev()
                    .find_map(|o| o.error.clone())
                    .unwrap_or_default();
                log::warn!("seed {seed} fold {fold}: every {kind} draw failed ({last}); kind excluded");
                report.excluded.push((kind, last));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::rng::rng;

    #[test]
    fn argmax_with_earliest_tie() {
        assert_eq!(select_best_model(&[Some(0.61), Some(0.74), Some(0.70)]), Some(1));
        assert_eq!(select_best_model(&[Some(0.7), Some(0.7)]), Some(0));
        assert_eq!(select_best_model(&[None, Some(0.5), None]), Some(1));
        assert_eq!(select_best_model(&[None, None]), None);
    }

    fn data(n: usize, seed: u64) -> (Matrix, Vec<bool>) {
        let mut r = rng(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)])
            .collect();
        let y = rows.iter().map(|v| v[0] + r.gen_range(-0.5..0.5) > 0.0).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn winner_has_max_auc_and_kinds_failing_everywhere_are_dropped() {
        let (x, y) = data(120, 1);
        let (vx, vy) = data(40, 2);
        let (tx, _) = data(30, 3);
        // validation set is fine, but the training labels are single-class:
        // logit and nb must fail every draw while knn tolerates it
        let single = vec![true; 120];
        let r = search(
            &[ModelKind::Logit, ModelKind::Knn, ModelKind::Nb],
            4,
            0,
            0,
            (&x, &single),
            (&vx, &vy),
            &tx,
        );
        assert_eq!(r.results.len(), 1);
        assert_eq!(r.results[0].kind, ModelKind::Knn);
        assert_eq!(r.excluded.len(), 2);

        let r = search(&[ModelKind::Knn, ModelKind::Tree], 5, 0, 1, (&x, &y), (&vx, &vy), &tx);
        for res in &r.results {
            let best = res
                .outcomes
                .iter()
                .filter_map(|o| o.validation_auc)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(res.validation_auc, best);
            assert_eq!(res.outcomes[res.winner].validation_auc, Some(best));
            assert_eq!(res.test_scores.len(), 30);
            assert_eq!(res.validation_scores.len(), 40);
        }
    }

    #[test]
    fn draws_are_shared_across_folds() {
        let (x, y) = data(80, 4);
        let (vx, vy) = data(20, 5);
        let a = search(&[ModelKind::Logit], 3, 7, 0, (&x, &y), (&vx, &vy), &vx);
        let b = search(&[ModelKind::Logit], 3, 7, 1, (&x, &y), (&vx, &vy), &vx);
        let da: Vec<_> = a.results[0].outcomes.iter().map(|o| o.draw.clone()).collect();
        let db: Vec<_> = b.results[0].outcomes.iter().map(|o| o.draw.clone()).collect();
        assert_eq!(da, db);
    }

    #[test]
    fn search_is_schedule_independent() {
        let (x, y) = data(100, 6);
        let (vx, vy) = data(30, 7);
        let kinds = [ModelKind::Knn, ModelKind::Rf, ModelKind::Nb];
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| search(&kinds, 4, 3, 2, (&x, &y), (&vx, &vy), &vx))
        };
        assert_eq!(run(1), run(3));
    }
}
