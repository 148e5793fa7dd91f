use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::schema::{DatasetSpec, ReferencePolicy};
use super::table::RawTable;
use crate::error::{Error, Result};

/// Group membership for one protected feature.
///
/// Group ids are ordered by descending size, then by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupIndex {
    pub feature: String,
    pub labels: Vec<String>,
    pub sizes: Vec<usize>,
    pub assignment: Vec<usize>,
    pub reference: usize,
}

impl GroupIndex {
    pub fn n_groups(&self) -> usize {
        self.labels.len()
    }

    pub fn reference_label(&self) -> &str {
        &self.labels[self.reference]
    }

    /// Build from raw per-row labels.
    pub fn from_labels(feature: &str, values: &[String], policy: &ReferencePolicy) -> Result<Self> {
        let err = |reason: String| Error::Groups {
            feature: feature.to_string(),
            reason,
        };
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for v in values {
            *counts.entry(v.as_str()).or_default() += 1;
        }
        if counts.len() < 2 {
            return Err(err(format!(
                "needs at least two groups, found {}",
                counts.len()
            )));
        }
        let mut ordered: Vec<(&str, usize)> = counts.into_iter().collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let labels: Vec<String> = ordered.iter().map(|(l, _)| l.to_string()).collect();
        let sizes = ordered.iter().map(|(_, n)| *n).collect();
        let assignment = values
            .iter()
            .map(|v| labels.iter().position(|l| l == v).expect("label indexed"))
            .collect();
        let reference = match policy {
            ReferencePolicy::Largest => 0,
            ReferencePolicy::Explicit(label) => labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| err(format!("reference group `{label}` does not occur")))?,
        };
        Ok(GroupIndex {
            feature: feature.to_string(),
            labels,
            sizes,
            assignment,
            reference,
        })
    }
}

/// Group assignments for every protected feature, in declaration order.
pub fn extract_groups(table: &RawTable, spec: &DatasetSpec) -> Result<Vec<GroupIndex>> {
    spec.protected_features
        .iter()
        .map(|p| {
            let col = table.column(p).ok_or_else(|| Error::Groups {
                feature: p.clone(),
                reason: "column not loaded".into(),
            })?;
            GroupIndex::from_labels(p, &col.text, &spec.reference_policy(p))
        })
        .collect()
}
