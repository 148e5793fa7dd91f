//! Declarative dataset schema, read from TOML.
//!
//! ```toml
//! name = "compas"
//! source = "../data/compas.csv"      # relative to this file
//! label = "two_year_recid"
//! positive_class = "1"
//! positive_meaning = "punitive"      # or "assistive"
//! protected = ["sex", "race"]
//! missing_values = ["", "NA"]        # optional, default [""]
//!
//! [reference_groups]                 # optional; default is the largest group
//! race = "Caucasian"
//!
//! [exclude_groups]                   # optional; rows in these groups are dropped
//! race = ["Asian"]
//!
//! [[columns]]
//! name = "age_cat"
//! kind = "ordinal"                   # numeric | binary | categorical | ordinal
//! levels = ["Less than 25", "25 - 45", "Greater than 45"]
//! role = "ignore"                    # feature (default) | label | ignore
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "levels", rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Binary,
    Categorical,
    Ordinal(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    #[default]
    Feature,
    Label,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositiveMeaning {
    Assistive,
    Punitive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferencePolicy {
    Largest,
    Explicit(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub source_path: PathBuf,
    pub columns: Vec<ColumnSpec>,
    pub label_column: String,
    pub positive_class: String,
    pub positive_meaning: PositiveMeaning,
    pub protected_features: Vec<String>,
    pub reference_groups: BTreeMap<String, String>,
    /// Protected-feature values whose rows are removed on load.
    pub exclude_groups: BTreeMap<String, Vec<String>>,
    pub missing_values: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColumn {
    name: String,
    kind: String,
    #[serde(default)]
    levels: Vec<String>,
    #[serde(default)]
    role: ColumnRole,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: String,
    source: PathBuf,
    label: String,
    positive_class: String,
    positive_meaning: PositiveMeaning,
    protected: Vec<String>,
    #[serde(default)]
    reference_groups: BTreeMap<String, String>,
    #[serde(default)]
    exclude_groups: BTreeMap<String, Vec<String>>,
    missing_values: Option<Vec<String>>,
    columns: Vec<RawColumn>,
}

impl DatasetSpec {
    /// Parse a schema; a relative `source` is resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("dataset schema: {e}")))?;
        let columns = raw
            .columns
            .into_iter()
            .map(|c| {
                let kind = match (c.kind.as_str(), c.levels.is_empty()) {
                    ("numeric", true) => ColumnKind::Numeric,
                    ("binary", true) => ColumnKind::Binary,
                    ("categorical", true) => ColumnKind::Categorical,
                    ("ordinal", false) => ColumnKind::Ordinal(c.levels),
                    ("ordinal", true) => {
                        return Err(Error::Config(format!(
                            "ordinal column `{}` needs a `levels` list",
                            c.name
                        )))
                    }
                    (k, _) => {
                        return Err(Error::Config(format!(
                            "column `{}`: unsupported kind `{k}` (levels only apply to ordinal)",
                            c.name
                        )))
                    }
                };
                Ok(ColumnSpec {
                    name: c.name,
                    kind,
                    role: c.role,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let source_path = if raw.source.is_absolute() {
            raw.source
        } else {
            base_dir.join(raw.source)
        };
        let spec = DatasetSpec {
            name: raw.name,
            source_path,
            columns,
            label_column: raw.label,
            positive_class: raw.positive_class,
            positive_meaning: raw.positive_meaning,
            protected_features: raw.protected,
            reference_groups: raw.reference_groups,
            exclude_groups: raw.exclude_groups,
            missing_values: raw.missing_values.unwrap_or_else(|| vec![String::new()]),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn reference_policy(&self, feature: &str) -> ReferencePolicy {
        match self.reference_groups.get(feature) {
            Some(label) => ReferencePolicy::Explicit(label.clone()),
            None => ReferencePolicy::Largest,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("dataset `{}`: {msg}", self.name)));
        let mut names = BTreeSet::new();
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return bad(format!("column `{}` declared twice", c.name));
            }
            if let ColumnKind::Ordinal(levels) = &c.kind {
                let distinct: BTreeSet<_> = levels.iter().collect();
                if distinct.len() != levels.len() {
                    return bad(format!("ordinal column `{}` repeats a level", c.name));
                }
            }
        }
        match self.column(&self.label_column) {
            None => return bad(format!("label column `{}` is not declared", self.label_column)),
            Some(c) if c.role != ColumnRole::Label => {
                return bad(format!("label column `{}` must have role `label`", c.name))
            }
            Some(_) => {}
        }
        let labels = self
            .columns
            .iter()
            .filter(|c| c.role == ColumnRole::Label)
            .count();
        if labels != 1 {
            return bad(format!("expected exactly one label column, found {labels}"));
        }
        if self.protected_features.is_empty() {
            return bad("no protected features declared".into());
        }
        for p in &self.protected_features {
            match self.column(p) {
                None => return bad(format!("protected feature `{p}` is not declared")),
                Some(c) if !matches!(c.kind, ColumnKind::Binary | ColumnKind::Categorical) => {
                    return bad(format!("protected feature `{p}` must be binary or categorical"))
                }
                Some(c) if c.role == ColumnRole::Label => {
                    return bad(format!("protected feature `{p}` cannot be the label"))
                }
                Some(_) => {}
            }
        }
        for f in self.reference_groups.keys() {
            if !self.protected_features.contains(f) {
                return bad(format!("reference group given for unprotected column `{f}`"));
            }
        }
        for (f, levels) in &self.exclude_groups {
            if !self.protected_features.contains(f) {
                return bad(format!("excluded groups given for unprotected column `{f}`"));
            }
            if self.reference_groups.get(f).is_some_and(|r| levels.contains(r)) {
                return bad(format!("reference group of `{f}` is excluded"));
            }
        }
        Ok(())
    }
}
