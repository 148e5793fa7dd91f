//! Run configuration files.
//!
//! A run config is TOML. Paths are resolved against the directory holding
//! the config file.
//!
//! ```toml
//! mode = "full"                 # or "audit"
//! datasets = ["compas.toml"]    # dataset schema files (full mode)
//! models = ["logit", "mlp"]
//! seeds = 3                     # a count (seeds 0..3) or a list such as [0, 7]
//! folds = 5
//! validation_fraction = 0.1
//! search_draws = 10
//! output = "out"
//! plot_models = []              # empty: top two by pooled AUC
//!
//! [audit]                       # audit mode only
//! name = "vendor"
//! features = ["group"]
//! threshold = 0.5               # or validation_column = "is_validation"
//! model_column = "model"        # optional, splits one file into models
//! reference_groups = { group = "A" }
//! predictions = [{ model = "a", path = "a.csv" }]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::DatasetSpec;
use crate::models::ModelKind;
use crate::splits::FoldPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Full,
    Audit,
}

/// Seeds, folds and search draws of a preset run size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub seeds: u64,
    pub folds: usize,
    pub draws: usize,
}

pub const DESK_SCALE: Scale = Scale {
    seeds: 3,
    folds: 5,
    draws: 10,
};

pub const PAPER_SCALE: Scale = Scale {
    seeds: 10,
    folds: 10,
    draws: 30,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AuditThreshold {
    Fixed(f64),
    /// Rows with a truthy value in this column select the threshold; the
    /// remaining rows are evaluated.
    ValidationColumn(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSource {
    pub model: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub name: String,
    pub predictions: Vec<PredictionSource>,
    pub features: Vec<String>,
    pub threshold: AuditThreshold,
    pub model_column: Option<String>,
    pub reference_groups: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub datasets: Vec<DatasetSpec>,
    pub plan: FoldPlan,
    pub models: Vec<ModelKind>,
    pub search_draws: usize,
    /// `None` leaves the choice to the caller.
    pub output: Option<PathBuf>,
    pub plot_models: Vec<String>,
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
    pub audit: Option<AuditConfig>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSeeds {
    Count(u64),
    List(Vec<u64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrediction {
    model: String,
    path: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAudit {
    #[serde(default = "default_audit_name")]
    name: String,
    features: Vec<String>,
    predictions: Vec<RawPrediction>,
    threshold: Option<f64>,
    validation_column: Option<String>,
    model_column: Option<String>,
    #[serde(default)]
    reference_groups: BTreeMap<String, String>,
}

fn default_audit_name() -> String {
    "external".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    mode: Mode,
    #[serde(default)]
    datasets: Vec<PathBuf>,
    models: Option<Vec<String>>,
    seeds: Option<RawSeeds>,
    folds: Option<usize>,
    validation_fraction: Option<f64>,
    search_draws: Option<usize>,
    output: Option<PathBuf>,
    #[serde(default)]
    plot_models: Vec<String>,
    jobs: Option<usize>,
    audit: Option<RawAudit>,
}

pub fn seed_list(count: u64) -> Vec<u64> {
    (0..count).collect()
}

impl AuditThreshold {
    fn from_parts(fixed: Option<f64>, column: Option<String>) -> Result<Self> {
        match (fixed, column) {
            (Some(t), None) if (0.0..=1.0).contains(&t) => Ok(AuditThreshold::Fixed(t)),
            (Some(t), None) => Err(Error::Config(format!("threshold {t} lies outside [0, 1]"))),
            (None, Some(c)) => Ok(AuditThreshold::ValidationColumn(c)),
            _ => Err(Error::Config(
                "audit needs exactly one of `threshold` or `validation_column`".into(),
            )),
        }
    }
}

impl RunConfig {
    /// Full-mode config at desk scale over the given datasets.
    pub fn desk(datasets: Vec<DatasetSpec>, models: Vec<ModelKind>) -> Self {
        RunConfig {
            mode: Mode::Full,
            datasets,
            plan: FoldPlan {
                k: DESK_SCALE.folds,
                seeds: seed_list(DESK_SCALE.seeds),
                validation_fraction: 0.10,
            },
            models,
            search_draws: DESK_SCALE.draws,
            output: None,
            plot_models: Vec::new(),
            jobs: None,
            audit: None,
        }
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))?;
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let datasets = raw
            .datasets
            .iter()
            .map(|p| DatasetSpec::from_toml_file(&resolve(p)))
            .collect::<Result<Vec<_>>>()?;
        let models = match raw.models {
            Some(list) => ModelKind::parse_list(&list.join(","))?,
            None => ModelKind::ALL.to_vec(),
        };
        let seeds = match raw.seeds {
            Some(RawSeeds::Count(n)) => seed_list(n),
            Some(RawSeeds::List(v)) => v,
            None => seed_list(DESK_SCALE.seeds),
        };
        let audit = raw
            .audit
            .map(|a| -> Result<AuditConfig> {
                Ok(AuditConfig {
                    name: a.name,
                    predictions: a
                        .predictions
                        .into_iter()
                        .map(|p| PredictionSource {
                            model: p.model,
                            path: resolve(&p.path),
                        })
                        .collect(),
                    features: a.features,
                    threshold: AuditThreshold::from_parts(a.threshold, a.validation_column)?,
                    model_column: a.model_column,
                    reference_groups: a.reference_groups,
                })
            })
            .transpose()?;
        let cfg = RunConfig {
            mode: raw.mode,
            datasets,
            plan: FoldPlan {
                k: raw.folds.unwrap_or(DESK_SCALE.folds),
                seeds,
                validation_fraction: raw.validation_fraction.unwrap_or(0.10),
            },
            models,
            search_draws: raw.search_draws.unwrap_or(DESK_SCALE.draws),
            output: raw.output.map(|p| resolve(&p)),
            plot_models: raw.plot_models,
            jobs: raw.jobs,
            audit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.search_draws == 0 {
            return Err(Error::Config("search_draws must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        match self.mode {
            Mode::Full => {
                // fold/seed problems surface later as splits failures
                if self.datasets.is_empty() {
                    return Err(Error::Config("full mode needs at least one dataset".into()));
                }
                if self.models.is_empty() {
                    return Err(Error::Config("no model kinds selected".into()));
                }
                let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
                names.sort_unstable();
                names.dedup();
                if names.len() != self.datasets.len() {
                    return Err(Error::Config("dataset names must be distinct".into()));
                }
            }
            Mode::Audit => {
                let a = self
                    .audit
                    .as_ref()
                    .ok_or_else(|| Error::Config("audit mode needs an [audit] table".into()))?;
                a.validate()?;
            }
        }
        Ok(())
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        if self.predictions.is_empty() {
            return Err(Error::Config("audit needs at least one prediction file".into()));
        }
        if self.features.is_empty() {
            return Err(Error::Config("audit needs at least one protected feature".into()));
        }
        if self.model_column.is_none() {
            let mut models: Vec<&str> = self.predictions.iter().map(|p| p.model.as_str()).collect();
            models.sort_unstable();
            models.dedup();
            if models.len() != self.predictions.len() {
                return Err(Error::Config("prediction files must name distinct models".into()));
            }
        }
        if let AuditThreshold::Fixed(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("threshold {t} lies outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_desk_scale() {
        let cfg = RunConfig::from_toml_str(
            "mode = \"audit\"\n[audit]\nfeatures = [\"g\"]\nthreshold = 0.5\npredictions = [{ model = \"a\", path = \"a.csv\" }]\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.plan.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.plan.k, 5);
        assert_eq!(cfg.search_draws, 10);
        assert_eq!(cfg.output, None);
        let a = cfg.audit.unwrap();
        assert_eq!(a.predictions[0].path, PathBuf::from("/base/a.csv"));
        assert_eq!(a.threshold, AuditThreshold::Fixed(0.5));
    }

    #[test]
    fn seed_lists_and_bad_thresholds() {
        let base = "mode = \"audit\"\nseeds = [4, 9]\n[audit]\nfeatures = [\"g\"]\npredictions = [{ model = \"a\", path = \"a.csv\" }]\n";
        let cfg = RunConfig::from_toml_str(&format!("{base}validation_column = \"v\"\n"), Path::new(".")).unwrap();
        assert_eq!(cfg.plan.seeds, vec![4, 9]);
        assert!(RunConfig::from_toml_str(base, Path::new(".")).is_err());
        assert!(RunConfig::from_toml_str(&format!("{base}threshold = 1.5\n"), Path::new(".")).is_err());
    }

    #[test]
    fn full_mode_needs_datasets() {
        let err = RunConfig::from_toml_str("models = [\"logit\"]\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("dataset"));
        assert!(RunConfig::from_toml_str("models = [\"svm\"]\n", Path::new(".")).is_err());
    }
}
