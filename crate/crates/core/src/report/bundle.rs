use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::{DistanceVector, Linkage};
use crate::error::{Error, Result};
use crate::fairmatrix::MetricsMatrix;
use crate::metrics::{Metric, METRIC_COUNT};
use crate::models::HyperDraw;
use crate::pca::{AlignedProjection, PcaModel};
use crate::robustness::CorrelationSummary;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// Models trained by the cross-validation pipeline.
    Full,
    /// Externally supplied predictions.
    Audit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub n_rows: usize,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub mode: RunMode,
    pub datasets: Vec<DatasetMeta>,
    /// Empty in audit mode.
    pub seeds: Vec<u64>,
    pub folds: usize,
    pub validation_fraction: f64,
    pub models: Vec<String>,
    pub search_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerRecord {
    pub model: String,
    pub fold: usize,
    pub draw_index: usize,
    pub draw: HyperDraw,
    pub validation_auc: f64,
    pub completed_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub model: String,
    pub fold: Option<usize>,
    pub threshold: f64,
    /// Balanced accuracy reached on validation data; `None` on fallback.
    pub validation_ba: Option<f64>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAuc {
    pub model: String,
    /// AUC on the pooled test predictions of all rows.
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedRecord {
    pub model: String,
    pub fold: usize,
    pub reason: String,
}

/// Model selection results of one dataset and seed, shared by its features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub dataset: String,
    pub seed: Option<u64>,
    pub winners: Vec<WinnerRecord>,
    pub thresholds: Vec<ThresholdRecord>,
    /// Sorted by descending AUC, then model name.
    pub model_auc: Vec<ModelAuc>,
    pub excluded: Vec<ExcludedRecord>,
}

impl SeedRun {
    /// Models by descending pooled AUC.
    pub fn ranked_models(&self) -> Vec<&str> {
        self.model_auc.iter().map(|m| m.model.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub model: String,
    pub group: String,
    pub metric: Metric,
    /// `m_group / m_reference`; `None` when the reference value is zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub dataset: String,
    pub feature: String,
    pub seed: Option<u64>,
    pub reference_group: String,
    pub group_sizes: Vec<(String, usize)>,
    pub matrix: MetricsMatrix,
    pub column_distances: DistanceVector,
    pub row_distances: DistanceVector,
    pub column_linkage: Linkage,
    pub row_linkage: Linkage,
    /// Per-model PCA aligned on the reference group; absent when it could not be fit.
    pub projection: Option<AlignedProjection>,
    pub full_pca: Option<PcaModel>,
    pub fairness_ratios: Vec<RatioRecord>,
    /// Human-readable quality notes (imputed cells, degenerate correlations, skipped figures).
    pub notes: Vec<String>,
}

impl FeatureEntry {
    /// Relative output directory, e.g. `compas/race/seed0`.
    pub fn output_dir(&self) -> std::path::PathBuf {
        let mut p = Path::new(&self.dataset).join(&self.feature);
        if let Some(s) = self.seed {
            p = p.join(format!("seed{s}"));
        }
        p
    }
}

/// A (dataset, feature, seed) cell that did not complete. `None` in
/// `feature` or `seed` covers every feature or seed of the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub dataset: String,
    pub feature: Option<String>,
    pub seed: Option<u64>,
    pub stage: String,
    pub message: String,
}

impl FailureRecord {
    pub fn covers(&self, dataset: &str, feature: Option<&str>, seed: Option<u64>) -> bool {
        self.dataset == dataset
            && (self.feature.is_none() || self.feature.as_deref() == feature)
            && (self.seed.is_none() || self.seed == seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditBundle {
    pub schema_version: u32,
    pub run: RunMetadata,
    pub seed_runs: Vec<SeedRun>,
    pub entries: Vec<FeatureEntry>,
    pub robustness: Option<CorrelationSummary>,
    /// Cells that failed; their entries are absent.
    #[serde(default)]
    pub failures: Vec<FailureRecord>,
}

fn schema(msg: String) -> Error {
    Error::Schema(msg)
}

fn check_linkage(l: &Linkage, n: usize, what: &str) -> Result<()> {
    if l.n_leaves != n || l.merges.len() + 1 != n || l.labels.len() != n {
        return Err(schema(format!("{what} linkage does not match {n} items")));
    }
    for (s, m) in l.merges.iter().enumerate() {
        if m.left >= m.right || m.right >= n + s || !m.height.is_finite() {
            return Err(schema(format!("{what} linkage merge {s} is malformed")));
        }
    }
    Ok(())
}

fn check_distances(d: &DistanceVector, n: usize, what: &str) -> Result<()> {
    if d.labels.len() != n || d.distances.len() != n * n.saturating_sub(1) / 2 {
        return Err(schema(format!("{what} distances do not match {n} items")));
    }
    Ok(())
}

impl AuditBundle {
    pub fn entry(&self, dataset: &str, feature: &str, seed: Option<u64>) -> Option<&FeatureEntry> {
        self.entries
            .iter()
            .find(|e| e.dataset == dataset && e.feature == feature && e.seed == seed)
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn seed_run(&self, dataset: &str, seed: Option<u64>) -> Option<&SeedRun> {
        self.seed_runs.iter().find(|r| r.dataset == dataset && r.seed == seed)
    }

    /// Structural checks: every declared (dataset, feature, seed) has exactly
    /// one entry and all nested objects have consistent dimensions.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(schema(format!(
                "schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let seeds: Vec<Option<u64>> = match self.run.mode {
            RunMode::Full => self.run.seeds.iter().copied().map(Some).collect(),
            RunMode::Audit => vec![None],
        };
        if seeds.is_empty() {
            return Err(schema("no seeds declared".into()));
        }
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert((e.dataset.clone(), e.feature.clone(), e.seed)) {
                return Err(schema(format!("duplicate entry {}/{}", e.dataset, e.feature)));
            }
        }
        for ds in &self.run.datasets {
            for seed in &seeds {
                let failed = |f: Option<&str>| self.failures.iter().any(|r| r.covers(&ds.name, f, *seed));
                if self.seed_run(&ds.name, *seed).is_none() && !failed(None) {
                    return Err(schema(format!("dataset {} lacks a run for seed {seed:?}", ds.name)));
                }
                for f in &ds.features {
                    if self.entry(&ds.name, f, *seed).is_none() && !failed(Some(f)) {
                        return Err(schema(format!(
                            "declared feature {}/{f} has no entry for seed {seed:?}",
                            ds.name
                        )));
                    }
                }
            }
        }
        for e in &self.entries {
            let declared = self
                .run
                .datasets
                .iter()
                .any(|d| d.name == e.dataset && d.features.contains(&e.feature));
            if !declared || !seeds.contains(&e.seed) {
                return Err(schema(format!("undeclared entry {}/{}", e.dataset, e.feature)));
            }
            self.validate_entry(e)?;
        }
        if let Some(r) = &self.robustness {
            let n = r.labels.len();
            for m in [&r.means, &r.stds] {
                if m.rows() != n || m.cols() != n {
                    return Err(schema("robustness matrices do not match their labels".into()));
                }
            }
        }
        Ok(())
    }

    fn validate_entry(&self, e: &FeatureEntry) -> Result<()> {
        let m = &e.matrix;
        let rows = m.rows.len();
        let what = format!("{}/{}", e.dataset, e.feature);
        if rows == 0
            || m.values.rows() != rows
            || m.values.cols() != METRIC_COUNT
            || m.imputed.len() != rows
            || m.column_variances.len() != METRIC_COUNT
        {
            return Err(schema(format!("{what}: matrix dimensions are inconsistent")));
        }
        let groups = m.groups().len();
        if groups * m.models().len() != rows || groups != e.group_sizes.len() {
            return Err(schema(format!("{what}: rows are not groups x models")));
        }
        if !e.group_sizes.iter().any(|(g, _)| *g == e.reference_group) {
            return Err(schema(format!("{what}: reference group is not a group")));
        }
        check_distances(&e.column_distances, METRIC_COUNT, "column")?;
        check_distances(&e.row_distances, rows, "row")?;
        check_linkage(&e.column_linkage, METRIC_COUNT, "column")?;
        check_linkage(&e.row_linkage, rows, "row")?;
        if let Some(p) = &e.projection {
            let k = p.pca.n_components();
            if p.groups.len() != groups
                || p.models.iter().any(|mp| mp.coordinates.rows() != groups || mp.coordinates.cols() != k)
            {
                return Err(schema(format!("{what}: projection dimensions are inconsistent")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: AuditBundle = serde_json::from_str(text)?;
        b.validate()?;
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}
