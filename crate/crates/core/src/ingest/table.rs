use std::path::{Path, PathBuf};

use serde::Serialize;

use super::schema::{ColumnKind, ColumnRole, DatasetSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawColumn {
    pub name: String,
    pub text: Vec<String>,
    /// Parsed values for numeric columns.
    pub numeric: Option<Vec<f64>>,
}

/// Declared columns of a CSV file, restricted to complete rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawTable {
    pub source: PathBuf,
    pub columns: Vec<RawColumn>,
    pub n_rows: usize,
    /// Missing cells per declared column, counted before rows were dropped.
    pub missing_cells: Vec<(String, usize)>,
    /// Rows dropped because a feature, label or protected cell was missing.
    pub dropped_rows: usize,
    /// Complete rows removed because they belong to an excluded group.
    pub excluded_rows: usize,
}

impl RawTable {
    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Read the declared columns of `spec.source_path`.
///
/// Undeclared CSV columns are skipped. Rows with a missing value in any
/// column that is not `ignore` are dropped and counted.
pub fn load_dataset(spec: &DatasetSpec) -> Result<RawTable> {
    let path = spec.source_path.as_path();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file, path, spec)
}

pub(crate) fn read_table<R: std::io::Read>(
    reader: R,
    path: &Path,
    spec: &DatasetSpec,
) -> Result<RawTable> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let positions = spec
        .columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h.trim() == c.name)
                .ok_or_else(|| Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: c.name.clone(),
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let is_missing = |cell: &str| spec.missing_values.iter().any(|m| m == cell);
    let mut text: Vec<Vec<String>> = vec![Vec::new(); spec.columns.len()];
    let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); spec.columns.len()];
    let mut missing = vec![0usize; spec.columns.len()];
    let mut dropped = 0;
    let mut excluded = 0;
    let exclusions: Vec<(usize, &Vec<String>)> = spec
        .exclude_groups
        .iter()
        .filter_map(|(f, levels)| spec.columns.iter().position(|c| &c.name == f).map(|i| (i, levels)))
        .collect();

    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut row_complete = true;
        let mut cells = Vec::with_capacity(spec.columns.len());
        for (ci, (col, &pos)) in spec.columns.iter().zip(&positions).enumerate() {
            let cell = record.get(pos).unwrap_or("").trim();
            if is_missing(cell) {
                missing[ci] += 1;
                if col.role != ColumnRole::Ignore {
                    row_complete = false;
                }
            }
            cells.push(cell);
        }
        if !row_complete {
            dropped += 1;
            continue;
        }
        if exclusions.iter().any(|(ci, levels)| levels.iter().any(|l| l == cells[*ci])) {
            excluded += 1;
            continue;
        }
        for (ci, (col, cell)) in spec.columns.iter().zip(cells).enumerate() {
            if col.kind == ColumnKind::Numeric && col.role != ColumnRole::Ignore {
                let v: f64 = cell.parse().map_err(|_| Error::BadNumber {
                    row: line,
                    column: col.name.clone(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::BadNumber {
                        row: line,
                        column: col.name.clone(),
                        value: cell.to_string(),
                    });
                }
                numeric[ci].push(v);
            }
            text[ci].push(cell.to_string());
        }
    }

    let n_rows = text.first().map_or(0, Vec::len);
    let columns = spec
        .columns
        .iter()
        .zip(text.into_iter().zip(numeric))
        .map(|(c, (text, num))| RawColumn {
            name: c.name.clone(),
            numeric: (c.kind == ColumnKind::Numeric && c.role != ColumnRole::Ignore).then_some(num),
            text,
        })
        .collect();
    if dropped > 0 {
        log::warn!(
            "{}: dropped {dropped} rows with missing values",
            path.display()
        );
    }
    if excluded > 0 {
        log::info!("{}: removed {excluded} rows of excluded groups", path.display());
    }
    Ok(RawTable {
        source: path.to_path_buf(),
        columns,
        n_rows,
        missing_cells: spec
            .columns
            .iter()
            .zip(missing)
            .map(|(c, m)| (c.name.clone(), m))
            .collect(),
        dropped_rows: dropped,
        excluded_rows: excluded,
    })
}
