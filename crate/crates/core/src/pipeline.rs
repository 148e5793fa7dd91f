//! Cross-validated training runs: splits, search, thresholds, pooled group
//! metrics and everything derived from the metrics matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{correlation_distance, upgma, Axis};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::fairmatrix::{aggregate_over_folds, assemble_matrix, column_names, Aggregation, FoldPredictions, Provenance};
use crate::ingest::{encode_labels, extract_groups, load_dataset, DatasetSpec, Encoder, GroupIndex, RawTable};
use crate::metrics::{auc_or_imputed, select_threshold, Metric};
use crate::models::{search, SearchReport};
use crate::pca::{aligned_model_pca, full_matrix_pca};
use crate::report::{
    AuditBundle, DatasetMeta, ExcludedRecord, FailureRecord, FeatureEntry, ModelAuc, RatioRecord, RunMetadata, RunMode,
    SeedRun, ThresholdRecord, WinnerRecord, SCHEMA_VERSION,
};
use crate::robustness::{aggregate_over_seeds, correlation_matrix, CorrelationSummary, SeedCorrelations};
use crate::splits::{make_folds, SplitAssignment};

/// Test scores of one fold, indexed by dataset row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredFold {
    pub rows: Vec<usize>,
    pub scores: Vec<f64>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelScores {
    pub model: String,
    pub folds: Vec<ScoredFold>,
}

/// Everything needed to describe one (dataset, seed) cell in error messages.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell<'a> {
    pub dataset: &'a str,
    pub seed: Option<u64>,
}

impl Cell<'_> {
    pub(crate) fn error(&self, feature: Option<&str>, stage: &'static str, source: Error) -> Error {
        Error::Stage {
            dataset: self.dataset.to_string(),
            feature: feature.unwrap_or("*").to_string(),
            seed: self.seed.map_or_else(|| "-".to_string(), |s| s.to_string()),
            stage,
            source: Box::new(source),
        }
    }

    pub(crate) fn failure(&self, feature: Option<&str>, stage: &'static str, source: Error) -> FailureRecord {
        let err = self.error(feature, stage, source);
        log::error!("{err}");
        FailureRecord {
            dataset: self.dataset.to_string(),
            feature: feature.map(str::to_string),
            seed: self.seed,
            stage: stage.to_string(),
            message: err.to_string(),
        }
    }
}

/// Machine-readable list of failed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureManifest {
    pub failures: Vec<FailureRecord>,
}

impl FailureManifest {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub(crate) fn ranked_auc(mut aucs: Vec<ModelAuc>) -> Vec<ModelAuc> {
    aucs.sort_by(|a, b| b.auc.total_cmp(&a.auc).then_with(|| a.model.cmp(&b.model)));
    aucs
}

pub(crate) fn pooled_auc(scores: &ModelScores, labels: &[bool]) -> Result<f64> {
    let mut s = Vec::new();
    let mut y = Vec::new();
    for f in &scores.folds {
        s.extend_from_slice(&f.scores);
        y.extend(f.rows.iter().map(|&r| labels[r]));
    }
    let (auc, imputed) = auc_or_imputed(&s, &y)?;
    if imputed {
        log::warn!("{}: pooled test labels have one class, AUC set to 0.5", scores.model);
    }
    Ok(auc)
}

/// Group metrics, matrix, clustering, projections and ratios of one feature.
pub(crate) fn analyze_feature(
    cell: Cell<'_>,
    groups: &GroupIndex,
    labels: &[bool],
    scores: &[ModelScores],
    ranked: &[ModelAuc],
    n_total: u64,
    aggregation: Aggregation,
) -> Result<FeatureEntry> {
    let feature = groups.feature.as_str();
    let st = |stage: &'static str| move |e: Error| cell.error(Some(feature), stage, e);

    let mut vectors = Vec::with_capacity(scores.len());
    for ms in scores {
        let folds: Vec<FoldPredictions> = ms
            .folds
            .iter()
            .map(|f| FoldPredictions {
                scores: f.scores.clone(),
                labels: f.rows.iter().map(|&r| labels[r]).collect(),
                groups: f.rows.iter().map(|&r| groups.assignment[r]).collect(),
                threshold: f.threshold,
            })
            .collect();
        let v = aggregate_over_folds(&folds, groups.n_groups(), n_total).map_err(st("metrics"))?;
        vectors.push((ms.model.clone(), v));
    }
    let provenance = Provenance {
        dataset: cell.dataset.to_string(),
        feature: feature.to_string(),
        seed: cell.seed,
        aggregation,
    };
    let matrix = assemble_matrix(provenance, &groups.labels, &vectors).map_err(st("fairmatrix"))?;

    let mut notes = Vec::new();
    let row_labels = matrix.row_labels();
    for (label, flags) in row_labels.iter().zip(&matrix.imputed) {
        let imputed: Vec<&str> = Metric::ALL
            .iter()
            .filter(|m| flags[m.index()])
            .map(|m| m.name())
            .collect();
        if !imputed.is_empty() {
            notes.push(format!("{label}: imputed {}", imputed.join(", ")));
        }
    }

    let metric_labels: Vec<String> = column_names().iter().map(|s| s.to_string()).collect();
    let column_distances =
        correlation_distance(&matrix.values, &metric_labels, Axis::Columns).map_err(st("cluster"))?;
    let row_distances = correlation_distance(&matrix.values, &row_labels, Axis::Rows).map_err(st("cluster"))?;
    for (what, d) in [("metric", &column_distances), ("row", &row_distances)] {
        if !d.degenerate_pairs.is_empty() {
            notes.push(format!(
                "{} {what} pairs involve a constant vector; correlation taken as 0",
                d.degenerate_pairs.len()
            ));
        }
    }
    let column_linkage = upgma(&column_distances).map_err(st("cluster"))?;
    let row_linkage = upgma(&row_distances).map_err(st("cluster"))?;

    let reference = groups.reference_label();
    let models = matrix.models();
    let fit_model = ranked
        .iter()
        .map(|m| m.model.as_str())
        .find(|m| models.contains(m))
        .unwrap_or(models[0]);
    let projection = match aligned_model_pca(&matrix, fit_model, reference) {
        Ok(p) => {
            if p.explained_variance_ratios.len() < 2 {
                notes.push("fewer than two components per model; no scatter".into());
            }
            Some(p)
        }
        Err(e) => {
            log::warn!("{}/{feature}: aligned projection skipped: {e}", cell.dataset);
            notes.push(format!("aligned projection skipped: {e}"));
            None
        }
    };
    let full_pca = match full_matrix_pca(&matrix) {
        Ok(p) => Some(p),
        Err(e) => {
            notes.push(format!("full matrix pca skipped: {e}"));
            None
        }
    };

    let mut fairness_ratios = Vec::new();
    for model in &models {
        for g in groups.labels.iter().filter(|g| *g != reference) {
            for metric in Metric::ALL {
                fairness_ratios.push(RatioRecord {
                    model: model.to_string(),
                    group: g.clone(),
                    metric,
                    ratio: matrix.fairness_ratio(model, metric, g, reference).map_err(st("fairmatrix"))?,
                });
            }
        }
    }

    Ok(FeatureEntry {
        dataset: cell.dataset.to_string(),
        feature: feature.to_string(),
        seed: cell.seed,
        reference_group: reference.to_string(),
        group_sizes: groups.labels.iter().cloned().zip(groups.sizes.iter().copied()).collect(),
        matrix,
        column_distances,
        row_distances,
        column_linkage,
        row_linkage,
        projection,
        full_pca,
        fairness_ratios,
        notes,
    })
}

/// Robustness over the conditions (`dataset/feature`) present for every seed.
pub(crate) fn robustness_summary(entries: &[FeatureEntry], seeds: &[Option<u64>]) -> Result<Option<CorrelationSummary>> {
    let mut conditions: Vec<(&str, &str)> = Vec::new();
    for e in entries {
        let c = (e.dataset.as_str(), e.feature.as_str());
        if !conditions.contains(&c) {
            conditions.push(c);
        }
    }
    let find = |c: (&str, &str), s: Option<u64>| {
        entries
            .iter()
            .find(|e| e.dataset == c.0 && e.feature == c.1 && e.seed == s)
    };
    conditions.retain(|&c| seeds.iter().all(|&s| find(c, s).is_some()));
    if conditions.is_empty() {
        return Ok(None);
    }
    let labels: Vec<String> = conditions.iter().map(|(d, f)| format!("{d}/{f}")).collect();
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let vectors: Vec<_> = conditions
            .iter()
            .map(|&c| find(c, s).expect("retained").column_distances.clone())
            .collect();
        per_seed.push(SeedCorrelations {
            seed: s.unwrap_or(0),
            labels: labels.clone(),
            matrix: correlation_matrix(&vectors)?,
        });
    }
    aggregate_over_seeds(&per_seed).map(Some)
}

struct Prepared<'a> {
    spec: &'a DatasetSpec,
    table: RawTable,
    labels: Vec<bool>,
    groups: Vec<GroupIndex>,
}

fn prepare(spec: &DatasetSpec) -> Result<Prepared<'_>> {
    let table = load_dataset(spec)?;
    let labels = encode_labels(&table, spec)?;
    let groups = extract_groups(&table, spec)?;
    Ok(Prepared {
        spec,
        table,
        labels,
        groups,
    })
}

fn pick<T: Copy>(v: &[T], rows: &[usize]) -> Vec<T> {
    rows.iter().map(|&r| v[r]).collect()
}

fn fold_search(p: &Prepared<'_>, cfg: &RunConfig, s: &SplitAssignment) -> Result<SearchReport, (&'static str, Error)> {
    let enc = |e| ("encode", e);
    let encoder = Encoder::fit(&p.table, p.spec, &s.train_rows).map_err(enc)?;
    let x_train = encoder.transform(&p.table, &s.train_rows).map_err(enc)?;
    let x_val = encoder.transform(&p.table, &s.validation_rows).map_err(enc)?;
    let x_test = encoder.transform(&p.table, &s.test_rows).map_err(enc)?;
    let y_train = pick(&p.labels, &s.train_rows);
    let y_val = pick(&p.labels, &s.validation_rows);
    Ok(search(
        &cfg.models,
        cfg.search_draws,
        s.seed,
        s.fold,
        (&x_train, &y_train),
        (&x_val, &y_val),
        &x_test,
    ))
}

struct SeedOutput {
    run: SeedRun,
    scores: Vec<ModelScores>,
}

fn run_seed(p: &Prepared<'_>, cfg: &RunConfig, seed: u64) -> Result<SeedOutput, FailureRecord> {
    let cell = Cell {
        dataset: &p.spec.name,
        seed: Some(seed),
    };
    let splits = make_folds(p.table.n_rows, &cfg.plan, seed).map_err(|e| cell.failure(None, "splits", e))?;
    let reports: Vec<_> = splits.par_iter().map(|s| fold_search(p, cfg, s)).collect();
    let reports = reports
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|(stage, e)| cell.failure(None, stage, e))?;

    let mut excluded = Vec::new();
    for r in &reports {
        for (kind, reason) in &r.excluded {
            log::warn!("{}/seed {seed}/fold {}: {kind} excluded: {reason}", p.spec.name, r.fold);
            excluded.push(ExcludedRecord {
                model: kind.name().to_string(),
                fold: r.fold,
                reason: reason.clone(),
            });
        }
    }
    // a kind enters the matrices only if it produced test scores in every fold
    let mut kinds = cfg.models.clone();
    kinds.sort();
    kinds.retain(|k| reports.iter().all(|r| r.results.iter().any(|x| x.kind == *k)));
    if kinds.is_empty() {
        return Err(cell.failure(None, "models", Error::Training("no model kind completed every fold".into())));
    }

    let mut winners = Vec::new();
    let mut thresholds = Vec::new();
    let mut scores = Vec::new();
    for kind in kinds {
        let mut folds = Vec::with_capacity(reports.len());
        for (r, s) in reports.iter().zip(&splits) {
            let res = r.results.iter().find(|x| x.kind == kind).expect("retained kind");
            let y_val = pick(&p.labels, &s.validation_rows);
            let choice =
                select_threshold(&res.validation_scores, &y_val).map_err(|e| cell.failure(None, "thresholds", e))?;
            if choice.fallback {
                log::warn!("{}/seed {seed}/fold {}: single-class validation, threshold 0.5", p.spec.name, s.fold);
            }
            winners.push(WinnerRecord {
                model: kind.name().to_string(),
                fold: s.fold,
                draw_index: res.winner,
                draw: res.winning_draw().clone(),
                validation_auc: res.validation_auc,
                completed_draws: res.outcomes.iter().filter(|o| o.validation_auc.is_some()).count(),
            });
            thresholds.push(ThresholdRecord {
                model: kind.name().to_string(),
                fold: Some(s.fold),
                threshold: choice.t_max,
                validation_ba: (!choice.fallback).then_some(choice.achieved_ba),
                fallback: choice.fallback,
            });
            folds.push(ScoredFold {
                rows: s.test_rows.clone(),
                scores: res.test_scores.clone(),
                threshold: choice.t_max,
            });
        }
        scores.push(ModelScores {
            model: kind.name().to_string(),
            folds,
        });
    }
    let model_auc = scores
        .iter()
        .map(|s| {
            Ok(ModelAuc {
                model: s.model.clone(),
                auc: pooled_auc(s, &p.labels)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| cell.failure(None, "metrics", e))?;
    Ok(SeedOutput {
        run: SeedRun {
            dataset: p.spec.name.clone(),
            seed: Some(seed),
            winners,
            thresholds,
            model_auc: ranked_auc(model_auc),
            excluded,
        },
        scores,
    })
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Train, evaluate and analyse every (dataset, feature, seed) cell.
///
/// Failed cells are recorded in [`AuditBundle::failures`] and the rest of
/// the run continues. Audit-mode configs are forwarded to
/// [`crate::audit::audit_external_predictions`].
pub fn run_pipeline(cfg: &RunConfig) -> Result<AuditBundle> {
    cfg.validate()?;
    if cfg.mode == Mode::Audit {
        let audit = cfg.audit.as_ref().expect("validated");
        return with_pool(cfg.jobs, || crate::audit::audit_external_predictions(audit))?;
    }
    with_pool(cfg.jobs, || full_run(cfg))?
}

fn full_run(cfg: &RunConfig) -> Result<AuditBundle> {
    let mut datasets = Vec::new();
    let mut seed_runs = Vec::new();
    let mut entries = Vec::new();
    let mut failures = Vec::new();

    for spec in &cfg.datasets {
        let cell = Cell {
            dataset: &spec.name,
            seed: None,
        };
        let prepared = match prepare(spec) {
            Ok(p) => p,
            Err(e) => {
                failures.push(cell.failure(None, "ingest", e));
                datasets.push(DatasetMeta {
                    name: spec.name.clone(),
                    n_rows: 0,
                    features: spec.protected_features.clone(),
                });
                continue;
            }
        };
        datasets.push(DatasetMeta {
            name: spec.name.clone(),
            n_rows: prepared.table.n_rows,
            features: prepared.groups.iter().map(|g| g.feature.clone()).collect(),
        });
        log::info!("{}: {} rows", spec.name, prepared.table.n_rows);

        let outputs: Vec<_> = cfg
            .plan
            .seeds
            .par_iter()
            .map(|&seed| run_seed(&prepared, cfg, seed))
            .collect();
        for (out, &seed) in outputs.into_iter().zip(&cfg.plan.seeds) {
            let out = match out {
                Ok(o) => o,
                Err(f) => {
                    failures.push(f);
                    continue;
                }
            };
            let cell = Cell {
                dataset: &spec.name,
                seed: Some(seed),
            };
            let n_total = prepared.table.n_rows as u64;
            let analysed: Vec<_> = prepared
                .groups
                .par_iter()
                .map(|g| {
                    analyze_feature(
                        cell,
                        g,
                        &prepared.labels,
                        &out.scores,
                        &out.run.model_auc,
                        n_total,
                        Aggregation::PooledFolds,
                    )
                })
                .collect();
            for (res, g) in analysed.into_iter().zip(&prepared.groups) {
                match res {
                    Ok(e) => entries.push(e),
                    Err(Error::Stage { stage, source, .. }) => {
                        failures.push(cell.failure(Some(&g.feature), stage, *source));
                    }
                    Err(e) => failures.push(cell.failure(Some(&g.feature), "analysis", e)),
                }
            }
            seed_runs.push(out.run);
        }
    }

    let seeds: Vec<Option<u64>> = cfg.plan.seeds.iter().copied().map(Some).collect();
    let robustness = match robustness_summary(&entries, &seeds) {
        Ok(r) => r,
        Err(e) => {
            failures.push(
                Cell {
                    dataset: "*",
                    seed: None,
                }
                .failure(None, "robustness", e),
            );
            None
        }
    };

    let bundle = AuditBundle {
        schema_version: SCHEMA_VERSION,
        run: RunMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            mode: RunMode::Full,
            datasets,
            seeds: cfg.plan.seeds.clone(),
            folds: cfg.plan.k,
            validation_fraction: cfg.plan.validation_fraction,
            models: {
                let mut k = cfg.models.clone();
                k.sort();
                k.iter().map(|k| k.name().to_string()).collect()
            },
            search_draws: cfg.search_draws,
        },
        seed_runs,
        entries,
        robustness,
        failures,
    };
    bundle.validate()?;
    Ok(bundle)
}

fn bundle_seeds(bundle: &AuditBundle) -> Vec<Option<u64>> {
    match bundle.run.mode {
        RunMode::Full => bundle.run.seeds.iter().copied().map(Some).collect(),
        RunMode::Audit => vec![None],
    }
}

/// Recompute distances, linkages and the robustness summary from the
/// matrices stored in `bundle`.
pub fn recluster(bundle: &mut AuditBundle) -> Result<()> {
    let metric_labels: Vec<String> = column_names().iter().map(|s| s.to_string()).collect();
    for e in &mut bundle.entries {
        let cell = Cell {
            dataset: &e.dataset,
            seed: e.seed,
        };
        let st = |err| cell.error(Some(&e.feature), "cluster", err);
        let row_labels = e.matrix.row_labels();
        let cd = correlation_distance(&e.matrix.values, &metric_labels, Axis::Columns).map_err(st)?;
        let rd = correlation_distance(&e.matrix.values, &row_labels, Axis::Rows).map_err(st)?;
        let cl = upgma(&cd).map_err(st)?;
        let rl = upgma(&rd).map_err(st)?;
        (e.column_distances, e.row_distances, e.column_linkage, e.row_linkage) = (cd, rd, cl, rl);
    }
    bundle.robustness = robustness_summary(&bundle.entries, &bundle_seeds(bundle))?;
    bundle.validate()
}

/// Refit every aligned projection, on `fit_model` if given, else on the
/// model with the highest pooled AUC of the entry's seed.
pub fn reproject(bundle: &mut AuditBundle, fit_model: Option<&str>) -> Result<()> {
    let runs = bundle.seed_runs.clone();
    for e in &mut bundle.entries {
        let models = e.matrix.models();
        let chosen = match fit_model {
            Some(m) if models.contains(&m) => m.to_string(),
            Some(m) => return Err(Error::Config(format!("model {m} is not in {}/{}", e.dataset, e.feature))),
            None => runs
                .iter()
                .find(|r| r.dataset == e.dataset && r.seed == e.seed)
                .and_then(|r| r.ranked_models().into_iter().find(|m| models.contains(m)))
                .unwrap_or(models[0])
                .to_string(),
        };
        let cell = Cell {
            dataset: &e.dataset,
            seed: e.seed,
        };
        e.projection = Some(
            aligned_model_pca(&e.matrix, &chosen, &e.reference_group)
                .map_err(|err| cell.error(Some(&e.feature), "pca", err))?,
        );
        e.full_pca = Some(full_matrix_pca(&e.matrix).map_err(|err| cell.error(Some(&e.feature), "pca", err))?);
    }
    bundle.validate()
}
