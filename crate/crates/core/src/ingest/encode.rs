use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::groups::{extract_groups, GroupIndex};
use super::schema::{ColumnKind, ColumnRole, DatasetSpec};
use super::table::RawTable;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub column: String,
    pub mean: f64,
    pub std: f64,
}

/// Numeric encoding of a whole table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedDataset {
    pub design_matrix: Matrix,
    pub labels: Vec<bool>,
    pub groups: Vec<GroupIndex>,
    pub column_names: Vec<String>,
    pub normalization_params: Vec<NormalizationParams>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum ColumnEncoder {
    ZScore { col: usize, mean: f64, std: f64 },
    Binary { col: usize, one: String },
    OneHot { col: usize, levels: Vec<String> },
    Ordinal { col: usize, levels: Vec<String>, mean: f64, std: f64 },
}

/// Feature encoder. Category vocabularies come from the full table, while
/// z-score parameters are fitted on the rows passed to [`Encoder::fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    encoders: Vec<ColumnEncoder>,
    names: Vec<String>,
    params: Vec<NormalizationParams>,
    warnings: Vec<String>,
}

/// Population mean and std; zero spread yields std 0 and encodes as constant 0.
fn moments(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

fn z(x: f64, mean: f64, std: f64) -> f64 {
    if std > 0.0 {
        (x - mean) / std
    } else {
        0.0
    }
}

/// Distinct values in a numeric-aware order: numbers ascending when every
/// value parses, lexicographic otherwise.
fn sorted_levels(values: &[String]) -> Vec<String> {
    let distinct: BTreeSet<&String> = values.iter().collect();
    let mut levels: Vec<String> = distinct.into_iter().cloned().collect();
    if levels.iter().all(|v| v.parse::<f64>().is_ok()) {
        levels.sort_by(|a, b| {
            let (x, y): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
            x.total_cmp(&y).then_with(|| a.cmp(b))
        });
    }
    levels
}

impl Encoder {
    pub fn fit(table: &RawTable, spec: &DatasetSpec, rows: &[usize]) -> Result<Encoder> {
        let mut encoders = Vec::new();
        let mut names = Vec::new();
        let mut params = Vec::new();
        let mut warnings = Vec::new();
        for (ci, col) in spec.columns.iter().enumerate() {
            if col.role != ColumnRole::Feature {
                continue;
            }
            let raw = &table.columns[ci];
            let enc_err = |reason: String| Error::Encoding {
                column: col.name.clone(),
                reason,
            };
            match &col.kind {
                ColumnKind::Numeric => {
                    let values = raw.numeric.as_ref().expect("numeric column parsed at load");
                    let (mean, std) = moments(rows.iter().map(|&r| values[r]));
                    if std == 0.0 {
                        let w = format!("column `{}` has zero variance; encoded as 0", col.name);
                        log::warn!("{w}");
                        warnings.push(w);
                    }
                    params.push(NormalizationParams {
                        column: col.name.clone(),
                        mean,
                        std,
                    });
                    encoders.push(ColumnEncoder::ZScore { col: ci, mean, std });
                    names.push(col.name.clone());
                }
                ColumnKind::Binary => {
                    let levels = sorted_levels(&raw.text);
                    if levels.len() != 2 && table.n_rows > 0 {
                        return Err(enc_err(format!(
                            "binary column has {} distinct values",
                            levels.len()
                        )));
                    }
                    let one = levels.last().cloned().unwrap_or_default();
                    names.push(format!("{}={one}", col.name));
                    encoders.push(ColumnEncoder::Binary { col: ci, one });
                }
                ColumnKind::Categorical => {
                    let levels = sorted_levels(&raw.text);
                    if levels.len() < 2 && table.n_rows > 0 {
                        return Err(enc_err("categorical column has a single value".into()));
                    }
                    names.extend(levels.iter().map(|l| format!("{}={l}", col.name)));
                    encoders.push(ColumnEncoder::OneHot { col: ci, levels });
                }
                ColumnKind::Ordinal(levels) => {
                    let mut ranks = Vec::with_capacity(rows.len());
                    for &r in rows {
                        let v = &raw.text[r];
                        let rank = levels
                            .iter()
                            .position(|l| l == v)
                            .ok_or_else(|| enc_err(format!("unknown ordinal level `{v}`")))?;
                        ranks.push(rank as f64);
                    }
                    for v in &raw.text {
                        if !levels.contains(v) {
                            return Err(enc_err(format!("unknown ordinal level `{v}`")));
                        }
                    }
                    let (mean, std) = moments(ranks.iter().copied());
                    params.push(NormalizationParams {
                        column: col.name.clone(),
                        mean,
                        std,
                    });
                    encoders.push(ColumnEncoder::Ordinal {
                        col: ci,
                        levels: levels.clone(),
                        mean,
                        std,
                    });
                    names.push(col.name.clone());
                }
            }
        }
        Ok(Encoder {
            encoders,
            names,
            params,
            warnings,
        })
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn normalization_params(&self) -> &[NormalizationParams] {
        &self.params
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn transform(&self, table: &RawTable, rows: &[usize]) -> Result<Matrix> {
        let width = self.names.len();
        let mut m = Matrix::zeros(rows.len(), width);
        for (i, &r) in rows.iter().enumerate() {
            let out = m.row_mut(i);
            let mut j = 0;
            for enc in &self.encoders {
                match enc {
                    ColumnEncoder::ZScore { col, mean, std } => {
                        let v = table.columns[*col].numeric.as_ref().expect("numeric")[r];
                        out[j] = z(v, *mean, *std);
                        j += 1;
                    }
                    ColumnEncoder::Binary { col, one } => {
                        out[j] = f64::from(u8::from(&table.columns[*col].text[r] == one));
                        j += 1;
                    }
                    ColumnEncoder::OneHot { col, levels } => {
                        let v = &table.columns[*col].text[r];
                        // values outside the vocabulary encode as all zeros
                        if let Some(p) = levels.iter().position(|l| l == v) {
                            out[j + p] = 1.0;
                        }
                        j += levels.len();
                    }
                    ColumnEncoder::Ordinal {
                        col,
                        levels,
                        mean,
                        std,
                    } => {
                        let v = &table.columns[*col].text[r];
                        let rank = levels.iter().position(|l| l == v).ok_or_else(|| {
                            Error::Encoding {
                                column: table.columns[*col].name.clone(),
                                reason: format!("unknown ordinal level `{v}`"),
                            }
                        })?;
                        out[j] = z(rank as f64, *mean, *std);
                        j += 1;
                    }
                }
            }
        }
        Ok(m)
    }
}

/// Map the label column to booleans, `true` for the declared positive class.
pub fn encode_labels(table: &RawTable, spec: &DatasetSpec) -> Result<Vec<bool>> {
    let col = table
        .column(&spec.label_column)
        .ok_or_else(|| Error::Config(format!("label column `{}` not loaded", spec.label_column)))?;
    let labels: Vec<bool> = col.text.iter().map(|v| *v == spec.positive_class).collect();
    let distinct: BTreeSet<&String> = col.text.iter().collect();
    if distinct.len() > 2 {
        return Err(Error::Encoding {
            column: spec.label_column.clone(),
            reason: format!("label has {} distinct values", distinct.len()),
        });
    }
    if table.n_rows > 0 && !labels.iter().any(|&y| y) {
        return Err(Error::Encoding {
            column: spec.label_column.clone(),
            reason: format!("positive class `{}` never occurs", spec.positive_class),
        });
    }
    Ok(labels)
}

/// Encode the whole table, fitting normalization on every row. Used for
/// diagnostics; the pipeline refits the encoder per training fold.
pub fn encode_features(table: &RawTable, spec: &DatasetSpec) -> Result<EncodedDataset> {
    let all: Vec<usize> = (0..table.n_rows).collect();
    let encoder = Encoder::fit(table, spec, &all)?;
    let design_matrix = encoder.transform(table, &all)?;
    Ok(EncodedDataset {
        design_matrix,
        labels: encode_labels(table, spec)?,
        groups: extract_groups(table, spec)?,
        column_names: encoder.names.clone(),
        normalization_params: encoder.params.clone(),
        warnings: encoder.warnings.clone(),
    })
}
