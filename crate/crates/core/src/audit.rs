//! Audits of predictions produced elsewhere: no training, the rest of the
//! analysis is shared with full runs.
//!
//! A prediction file is a CSV with `y_true` (0/1), `y_score` (in `[0, 1]`),
//! one column per protected feature and optionally a model column and a
//! validation flag column. Row numbers in errors count data rows from 1.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::{AuditConfig, AuditThreshold, PredictionSource};
use crate::error::{Error, Result};
use crate::fairmatrix::Aggregation;
use crate::ingest::{GroupIndex, ReferencePolicy};
use crate::metrics::select_threshold;
use crate::pipeline::{analyze_feature, pooled_auc, ranked_auc, robustness_summary, Cell, ModelScores, ScoredFold};
use crate::report::{AuditBundle, DatasetMeta, ModelAuc, RunMetadata, RunMode, SeedRun, ThresholdRecord, SCHEMA_VERSION};

/// Parsed predictions of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub model: String,
    pub path: PathBuf,
    pub y_true: Vec<bool>,
    pub y_score: Vec<f64>,
    /// One label vector per audited feature.
    pub groups: Vec<Vec<String>>,
    pub validation: Option<Vec<bool>>,
}

fn parse_flag(v: &str) -> Option<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "yes" => Some(true),
        "0" | "0.0" | "false" | "no" => Some(false),
        _ => None,
    }
}

fn column(header: &csv::StringRecord, path: &Path, name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
}

/// Read one prediction file; with `model_column` set it may hold several models.
pub fn read_predictions(src: &PredictionSource, cfg: &AuditConfig) -> Result<Vec<PredictionTable>> {
    let path = src.path.as_path();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let y_col = column(&header, path, "y_true")?;
    let s_col = column(&header, path, "y_score")?;
    let g_cols = cfg
        .features
        .iter()
        .map(|f| column(&header, path, f))
        .collect::<Result<Vec<_>>>()?;
    let v_col = match &cfg.threshold {
        AuditThreshold::ValidationColumn(c) => Some(column(&header, path, c)?),
        AuditThreshold::Fixed(_) => None,
    };
    let m_col = cfg.model_column.as_deref().map(|c| column(&header, path, c)).transpose()?;

    let mut tables: Vec<PredictionTable> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(csv_err)?;
        let bad = |reason: String| Error::Prediction {
            path: path.to_path_buf(),
            row,
            reason,
        };
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let y = parse_flag(cell(y_col)).ok_or_else(|| bad(format!("y_true `{}` is not binary", cell(y_col))))?;
        let raw_score = cell(s_col).trim();
        let score: f64 = raw_score
            .parse()
            .map_err(|_| bad(format!("y_score `{raw_score}` is not a number")))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(bad(format!("y_score {raw_score} lies outside [0, 1]")));
        }
        let mut groups = Vec::with_capacity(g_cols.len());
        for (&c, f) in g_cols.iter().zip(&cfg.features) {
            let g = cell(c).trim();
            if g.is_empty() {
                return Err(bad(format!("empty group in column `{f}`")));
            }
            groups.push(g.to_string());
        }
        let flag = v_col
            .map(|c| {
                parse_flag(cell(c)).ok_or_else(|| bad(format!("validation flag `{}` is not binary", cell(c))))
            })
            .transpose()?;
        let model = m_col.map_or_else(|| src.model.clone(), |c| cell(c).trim().to_string());
        let t = *index.entry(model.clone()).or_insert_with(|| {
            tables.push(PredictionTable {
                model,
                path: path.to_path_buf(),
                y_true: Vec::new(),
                y_score: Vec::new(),
                groups: vec![Vec::new(); g_cols.len()],
                validation: v_col.map(|_| Vec::new()),
            });
            tables.len() - 1
        });
        let t = &mut tables[t];
        t.y_true.push(y);
        t.y_score.push(score);
        for (dst, g) in t.groups.iter_mut().zip(groups) {
            dst.push(g);
        }
        if let (Some(v), Some(flag)) = (t.validation.as_mut(), flag) {
            v.push(flag);
        }
    }
    if tables.is_empty() {
        return Err(Error::Prediction {
            path: path.to_path_buf(),
            row: 0,
            reason: "no prediction rows".into(),
        });
    }
    Ok(tables)
}

/// Every model must describe the same rows: labels, groups and validation flags agree.
fn check_consistent(tables: &[PredictionTable]) -> Result<()> {
    let first = &tables[0];
    for t in &tables[1..] {
        let mismatch = |row: usize, what: &str| Error::Prediction {
            path: t.path.clone(),
            row,
            reason: format!("{what} of model {} differs from model {}", t.model, first.model),
        };
        if t.y_true.len() != first.y_true.len() {
            return Err(Error::Prediction {
                path: t.path.clone(),
                row: t.y_true.len(),
                reason: format!(
                    "model {} has {} rows, model {} has {}",
                    t.model,
                    t.y_true.len(),
                    first.model,
                    first.y_true.len()
                ),
            });
        }
        if let Some(i) = (0..t.y_true.len()).find(|&i| t.y_true[i] != first.y_true[i]) {
            return Err(mismatch(i + 1, "y_true"));
        }
        for (a, b) in t.groups.iter().zip(&first.groups) {
            if let Some(i) = (0..a.len()).find(|&i| a[i] != b[i]) {
                return Err(mismatch(i + 1, "group"));
            }
        }
        if let (Some(a), Some(b)) = (&t.validation, &first.validation) {
            if let Some(i) = (0..a.len()).find(|&i| a[i] != b[i]) {
                return Err(mismatch(i + 1, "validation flag"));
            }
        }
    }
    Ok(())
}

/// Thresholds, group metrics and the derived analyses for external predictions.
///
/// With a validation column, the threshold of each model maximizes balanced
/// accuracy on the flagged rows and metrics use the remaining rows; with a
/// fixed threshold every row is evaluated.
pub fn audit_external_predictions(cfg: &AuditConfig) -> Result<AuditBundle> {
    cfg.validate()?;
    let mut tables = Vec::new();
    for src in &cfg.predictions {
        tables.extend(read_predictions(src, cfg)?);
    }
    {
        let mut names: Vec<&str> = tables.iter().map(|t| t.model.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != tables.len() {
            return Err(Error::Config("a model appears in more than one prediction file".into()));
        }
    }
    check_consistent(&tables)?;

    let first = &tables[0];
    let n = first.y_true.len();
    let labels = first.y_true.clone();
    let (eval_rows, val_rows): (Vec<usize>, Vec<usize>) = match &first.validation {
        Some(v) => (0..n).partition(|&i| !v[i]),
        None => ((0..n).collect(), Vec::new()),
    };
    if eval_rows.is_empty() {
        return Err(Error::Config("every row is a validation row; nothing to evaluate".into()));
    }
    if first.validation.is_some() && val_rows.is_empty() {
        return Err(Error::Config("validation column flags no rows".into()));
    }

    let mut thresholds = Vec::new();
    let mut scores = Vec::new();
    for t in &tables {
        let (threshold, record) = match cfg.threshold {
            AuditThreshold::Fixed(th) => (
                th,
                ThresholdRecord {
                    model: t.model.clone(),
                    fold: None,
                    threshold: th,
                    validation_ba: None,
                    fallback: false,
                },
            ),
            AuditThreshold::ValidationColumn(_) => {
                let s: Vec<f64> = val_rows.iter().map(|&r| t.y_score[r]).collect();
                let y: Vec<bool> = val_rows.iter().map(|&r| labels[r]).collect();
                let c = select_threshold(&s, &y)?;
                (
                    c.t_max,
                    ThresholdRecord {
                        model: t.model.clone(),
                        fold: None,
                        threshold: c.t_max,
                        validation_ba: (!c.fallback).then_some(c.achieved_ba),
                        fallback: c.fallback,
                    },
                )
            }
        };
        thresholds.push(record);
        scores.push(ModelScores {
            model: t.model.clone(),
            folds: vec![ScoredFold {
                rows: eval_rows.clone(),
                scores: eval_rows.iter().map(|&r| t.y_score[r]).collect(),
                threshold,
            }],
        });
    }
    let model_auc = ranked_auc(
        scores
            .iter()
            .map(|s| {
                Ok(ModelAuc {
                    model: s.model.clone(),
                    auc: pooled_auc(s, &labels)?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    );

    let cell = Cell {
        dataset: &cfg.name,
        seed: None,
    };
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (f, feature) in cfg.features.iter().enumerate() {
        let policy = cfg
            .reference_groups
            .get(feature)
            .map_or(ReferencePolicy::Largest, |g| ReferencePolicy::Explicit(g.clone()));
        let groups = GroupIndex::from_labels(feature, &first.groups[f], &policy)
            .map_err(|e| cell.error(Some(feature), "groups", e))?;
        match analyze_feature(
            cell,
            &groups,
            &labels,
            &scores,
            &model_auc,
            eval_rows.len() as u64,
            Aggregation::External,
        ) {
            Ok(e) => entries.push(e),
            Err(Error::Stage { stage, source, .. }) => failures.push(cell.failure(Some(feature), stage, *source)),
            Err(e) => failures.push(cell.failure(Some(feature), "analysis", e)),
        }
    }
    let robustness = match robustness_summary(&entries, &[None]) {
        Ok(r) => r,
        Err(e) => {
            failures.push(cell.failure(None, "robustness", e));
            None
        }
    };

    let bundle = AuditBundle {
        schema_version: SCHEMA_VERSION,
        run: RunMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            mode: RunMode::Audit,
            datasets: vec![DatasetMeta {
                name: cfg.name.clone(),
                n_rows: n,
                features: cfg.features.clone(),
            }],
            seeds: Vec::new(),
            folds: 1,
            validation_fraction: val_rows.len() as f64 / n as f64,
            models: tables.iter().map(|t| t.model.clone()).collect(),
            search_draws: 0,
        },
        seed_runs: vec![SeedRun {
            dataset: cfg.name.clone(),
            seed: None,
            winners: Vec::new(),
            thresholds,
            model_auc,
            excluded: Vec::new(),
        }],
        entries,
        robustness,
        failures,
    };
    bundle.validate()?;
    Ok(bundle)
}
