//! Agreement of metric clusterings across datasets and protected features.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::{Axis, DistanceVector};
use crate::error::{Error, Result};
use crate::linalg::{pearson, Matrix};

/// Pearson correlation of two column-axis distance vectors over the same metrics.
/// `None` when either vector is constant.
pub fn distance_vector_correlation(a: &DistanceVector, b: &DistanceVector) -> Result<Option<f64>> {
    if a.axis != Axis::Columns || b.axis != Axis::Columns {
        return Err(Error::Robustness("only metric (column) distance vectors are comparable".into()));
    }
    if a.distances.len() != b.distances.len() {
        return Err(Error::LengthMismatch(a.distances.len(), b.distances.len()));
    }
    if a.labels != b.labels {
        return Err(Error::Robustness("distance vectors cover different metrics".into()));
    }
    Ok(pearson(&a.distances, &b.distances))
}

/// Correlations between every pair of conditions for one seed. Undefined
/// correlations are stored as 0 and logged; the diagonal is exactly 1.
pub fn correlation_matrix(vectors: &[DistanceVector]) -> Result<Matrix> {
    let n = vectors.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        m.set(i, i, 1.0);
        for j in i + 1..n {
            let r = distance_vector_correlation(&vectors[i], &vectors[j])?.unwrap_or_else(|| {
                log::warn!("constant distance vector; correlation {i},{j} set to 0");
                0.0
            });
            m.set(i, j, r);
            m.set(j, i, r);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedCorrelations {
    pub seed: u64,
    /// Condition labels such as `compas/race`.
    pub labels: Vec<String>,
    pub matrix: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub labels: Vec<String>,
    pub means: Matrix,
    /// Population standard deviation across seeds.
    pub stds: Matrix,
    pub n_seeds: usize,
}

/// Elementwise mean and population std of per-seed correlation matrices.
pub fn aggregate_over_seeds(per_seed: &[SeedCorrelations]) -> Result<CorrelationSummary> {
    let first = per_seed
        .first()
        .ok_or_else(|| Error::Robustness("no seeds to aggregate".into()))?;
    let n = first.labels.len();
    for s in per_seed {
        if s.labels != first.labels || s.matrix.rows() != n || s.matrix.cols() != n {
            return Err(Error::Robustness(format!(
                "seed {} covers different conditions than seed {}",
                s.seed, first.seed
            )));
        }
    }
    let k = per_seed.len() as f64;
    let mut means = Matrix::zeros(n, n);
    let mut stds = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (mean, std) = if i == j {
                (1.0, 0.0)
            } else {
                let vals: Vec<f64> = per_seed.iter().map(|s| s.matrix.get(i, j)).collect();
                let mean = vals.iter().sum::<f64>() / k;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
                (mean.clamp(-1.0, 1.0), var.sqrt())
            };
            means.set(i, j, mean);
            means.set(j, i, mean);
            stds.set(i, j, std);
            stds.set(j, i, std);
        }
    }
    Ok(CorrelationSummary {
        labels: first.labels.clone(),
        means,
        stds,
        n_seeds: per_seed.len(),
    })
}

pub fn write_labelled_csv<W: Write>(labels: &[String], m: &Matrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Render(e.to_string());
    let mut header = vec![String::new()];
    header.extend(labels.iter().cloned());
    w.write_record(&header).map_err(err)?;
    for (i, l) in labels.iter().enumerate() {
        let mut rec = vec![l.clone()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Render(e.to_string()))
}

impl CorrelationSummary {
    /// Writes `means.csv` and `stds.csv` into `dir`.
    pub fn save_csv(&self, dir: &Path) -> Result<()> {
        for (name, m) in [("means.csv", &self.means), ("stds.csv", &self.stds)] {
            let path = dir.join(name);
            let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_labelled_csv(&self.labels, m, std::io::BufWriter::new(f))?;
        }
        Ok(())
    }
}
