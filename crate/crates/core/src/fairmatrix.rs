//! Metrics matrices: one row per (model, group), one column per metric.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{population_variance, Matrix};
use crate::metrics::{
    auc_or_imputed, compute_metric_vector, confusion_at_threshold, ConfusionCounts, Metric,
    MetricVector, METRIC_COUNT,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowKey {
    pub model: String,
    pub group: String,
    pub feature: String,
}

impl RowKey {
    pub fn label(&self) -> String {
        format!("{}:{}", self.model, self.group)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Counts pooled over the test folds of one seed.
    PooledFolds,
    /// Supplied predictions evaluated once.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: String,
    pub feature: String,
    pub seed: Option<u64>,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsMatrix {
    pub rows: Vec<RowKey>,
    pub values: Matrix,
    pub imputed: Vec<[bool; METRIC_COUNT]>,
    /// Population variance of each column.
    pub column_variances: Vec<f64>,
    pub provenance: Provenance,
}

pub fn column_names() -> Vec<&'static str> {
    Metric::ALL.iter().map(|m| m.name()).collect()
}

/// Stack per-group vectors into a matrix, models outer and groups inner.
///
/// `groups` gives the group order (the caller's group index order) and
/// `models` pairs each model label with one vector per group in that order.
pub fn assemble_matrix(
    provenance: Provenance,
    groups: &[String],
    models: &[(String, Vec<MetricVector>)],
) -> Result<MetricsMatrix> {
    if models.is_empty() || groups.is_empty() {
        return Err(Error::Matrix("need at least one model and one group".into()));
    }
    let mut rows = Vec::new();
    let mut data = Vec::new();
    let mut imputed = Vec::new();
    for (model, vectors) in models {
        if vectors.len() != groups.len() {
            return Err(Error::Matrix(format!(
                "model {model} has {} group vectors, expected {}",
                vectors.len(),
                groups.len()
            )));
        }
        if rows.iter().any(|k: &RowKey| &k.model == model) {
            return Err(Error::Matrix(format!("duplicate model {model}")));
        }
        for (group, v) in groups.iter().zip(vectors) {
            rows.push(RowKey {
                model: model.clone(),
                group: group.clone(),
                feature: provenance.feature.clone(),
            });
            data.extend_from_slice(&v.values);
            imputed.push(v.imputed);
        }
    }
    let values = Matrix::from_vec(rows.len(), METRIC_COUNT, data)?;
    if !values.is_finite() {
        return Err(Error::Matrix("non-finite metric value".into()));
    }
    let column_variances = (0..METRIC_COUNT)
        .map(|j| population_variance(&values.column(j)))
        .collect();
    Ok(MetricsMatrix {
        rows,
        values,
        imputed,
        column_variances,
        provenance,
    })
}

impl MetricsMatrix {
    /// Model labels in row-block order.
    pub fn models(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for k in &self.rows {
            if out.last() != Some(&k.model.as_str()) {
                out.push(&k.model);
            }
        }
        out
    }

    pub fn groups(&self) -> Vec<&str> {
        let first = &self.rows[0].model;
        self.rows
            .iter()
            .take_while(|k| &k.model == first)
            .map(|k| k.group.as_str())
            .collect()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row_labels(&self) -> Vec<String> {
        self.rows.iter().map(RowKey::label).collect()
    }

    pub fn value(&self, model: &str, group: &str, metric: Metric) -> Option<f64> {
        self.rows
            .iter()
            .position(|k| k.model == model && k.group == group)
            .map(|i| self.values.get(i, metric.index()))
    }

    /// The rows of one model, as their own matrix.
    pub fn per_model_matrix(&self, model: &str) -> Result<MetricsMatrix> {
        let idx: Vec<usize> = (0..self.rows.len())
            .filter(|&i| self.rows[i].model == model)
            .collect();
        if idx.is_empty() {
            return Err(Error::Matrix(format!("unknown model {model}")));
        }
        let values = self.values.select_rows(&idx);
        Ok(MetricsMatrix {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            imputed: idx.iter().map(|&i| self.imputed[i]).collect(),
            column_variances: (0..METRIC_COUNT)
                .map(|j| population_variance(&values.column(j)))
                .collect(),
            values,
            provenance: self.provenance.clone(),
        })
    }

    /// `m_g(j) / m_h(j)` for one model; `Ok(None)` when `m_h(j)` is zero.
    pub fn fairness_ratio(&self, model: &str, metric: Metric, g: &str, h: &str) -> Result<Option<f64>> {
        let get = |group: &str| {
            self.value(model, group, metric)
                .ok_or_else(|| Error::Matrix(format!("no row {model}:{group}")))
        };
        let (num, den) = (get(g)?, get(h)?);
        Ok(if den == 0.0 { None } else { Some(num / den) })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Render(e.to_string());
        let mut header = vec!["row"];
        header.extend(column_names());
        w.write_record(&header).map_err(csv_err)?;
        for (i, key) in self.rows.iter().enumerate() {
            let mut rec = vec![key.label()];
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Render(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Test-fold predictions of one model with the threshold chosen for that fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPredictions {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    /// Group id of each row.
    pub groups: Vec<usize>,
    pub threshold: f64,
}

/// Per-group confusion counts summed across folds.
pub fn pooled_counts(folds: &[FoldPredictions], n_groups: usize) -> Result<Vec<ConfusionCounts>> {
    let mut counts = vec![ConfusionCounts::default(); n_groups];
    for f in folds {
        if f.groups.len() != f.scores.len() {
            return Err(Error::LengthMismatch(f.groups.len(), f.scores.len()));
        }
        for (g, c) in counts.iter_mut().enumerate() {
            let idx: Vec<usize> = (0..f.scores.len()).filter(|&i| f.groups[i] == g).collect();
            let s: Vec<f64> = idx.iter().map(|&i| f.scores[i]).collect();
            let y: Vec<bool> = idx.iter().map(|&i| f.labels[i]).collect();
            *c = *c + confusion_at_threshold(&s, &y, f.threshold)?;
        }
        if let Some(&g) = f.groups.iter().find(|&&g| g >= n_groups) {
            return Err(Error::Groups {
                feature: String::new(),
                reason: format!("group id {g} out of range"),
            });
        }
    }
    Ok(counts)
}

/// Micro-averaged group vectors: counts summed over folds, AUC on the pooled
/// scores of each group. A group absent from every fold is fully imputed.
pub fn aggregate_over_folds(
    folds: &[FoldPredictions],
    n_groups: usize,
    n_total: u64,
) -> Result<Vec<MetricVector>> {
    if folds.is_empty() {
        return Err(Error::Matrix("no folds to aggregate".into()));
    }
    let counts = pooled_counts(folds, n_groups)?;
    let mut out = Vec::with_capacity(n_groups);
    for (g, c) in counts.iter().enumerate() {
        if c.total() == 0 {
            out.push(MetricVector::fully_imputed());
            continue;
        }
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for f in folds {
            for i in (0..f.scores.len()).filter(|&i| f.groups[i] == g) {
                scores.push(f.scores[i]);
                labels.push(f.labels[i]);
            }
        }
        let (auc, flag) = auc_or_imputed(&scores, &labels)?;
        out.push(compute_metric_vector(c, auc, flag, n_total)?);
    }
    Ok(out)
}
