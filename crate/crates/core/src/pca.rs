//! Principal components of metrics matrices and reference-aligned projections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairmatrix::MetricsMatrix;
use crate::linalg::Matrix;

const MAX_SWEEPS: usize = 100;

/// Thin SVD factors of an `m x n` matrix: singular values (descending) and
/// the matching right singular vectors as rows of an `n x n` matrix.
pub struct Svd {
    pub singular_values: Vec<f64>,
    pub right_vectors: Matrix,
}

/// One-sided Jacobi SVD. Columns of `a` are rotated pairwise until mutually
/// orthogonal; the accumulated rotations are the right singular vectors.
pub fn jacobi_svd(a: &Matrix) -> Svd {
    let (m, n) = (a.rows(), a.cols());
    // column-major copy: cols[j] is column j
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| f64::from(u8::from(i == j))).collect())
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[p][i], v[q][i]);
                    v[p][i] = c * x - s * y;
                    v[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let mut right = Vec::with_capacity(n * n);
    for &j in &order {
        right.extend_from_slice(&v[j]);
    }
    Svd {
        singular_values: order.iter().map(|&j| norms[j]).collect(),
        right_vectors: Matrix::from_vec(n, n, right).expect("square"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// `K x J`, orthonormal rows; each row's largest-magnitude entry is non-negative.
    pub components: Matrix,
    pub column_means: Vec<f64>,
    /// Share of the centered variance along each component, descending.
    pub explained_variance_ratios: Vec<f64>,
    pub fitted_on: String,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }
}

fn fix_sign(row: &mut [f64]) {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if v.abs() > row[best].abs() {
            best = i;
        }
    }
    if row[best] < 0.0 {
        row.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Fit `k` principal components on the column-centered rows of `m`.
pub fn fit_pca(m: &Matrix, k: usize, fitted_on: &str) -> Result<PcaModel> {
    let (rows, cols) = (m.rows(), m.cols());
    if rows < 2 {
        return Err(Error::Pca(format!("need at least 2 rows, got {rows}")));
    }
    if k == 0 || k > (rows - 1).min(cols) {
        return Err(Error::Pca(format!(
            "cannot keep {k} components of a {rows}x{cols} matrix"
        )));
    }
    let column_means: Vec<f64> = (0..cols)
        .map(|j| m.column(j).iter().sum::<f64>() / rows as f64)
        .collect();
    let mut centered = m.clone();
    for i in 0..rows {
        for (v, mu) in centered.row_mut(i).iter_mut().zip(&column_means) {
            *v -= mu;
        }
    }
    let svd = jacobi_svd(&centered);
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return Err(Error::Pca("all rows are identical".into()));
    }
    let mut comps = Vec::with_capacity(k * cols);
    for c in 0..k {
        let mut row = svd.right_vectors.row(c).to_vec();
        fix_sign(&mut row);
        comps.extend(row);
    }
    Ok(PcaModel {
        components: Matrix::from_vec(k, cols, comps)?,
        column_means,
        explained_variance_ratios: svd.singular_values[..k]
            .iter()
            .map(|s| s * s / total)
            .collect(),
        fitted_on: fitted_on.to_string(),
    })
}

/// Scores `(m - column_means) E^T`.
pub fn project(m: &Matrix, pca: &PcaModel) -> Result<Matrix> {
    if m.cols() != pca.column_means.len() {
        return Err(Error::Dimension {
            expected: pca.column_means.len(),
            actual: m.cols(),
        });
    }
    let k = pca.n_components();
    let mut out = Matrix::zeros(m.rows(), k);
    for i in 0..m.rows() {
        for c in 0..k {
            let v = m
                .row(i)
                .iter()
                .zip(&pca.column_means)
                .zip(pca.components.row(c))
                .map(|((x, mu), e)| (x - mu) * e)
                .sum();
            out.set(i, c, v);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProjection {
    pub model: String,
    /// `G x K`, rows in `groups` order.
    pub coordinates: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedProjection {
    pub reference: String,
    pub groups: Vec<String>,
    pub models: Vec<ModelProjection>,
    pub explained_variance_ratios: Vec<f64>,
    pub pca: PcaModel,
}

/// Translate each model's coordinates so the reference group sits at the origin.
pub fn align_to_reference(
    projections: &[ModelProjection],
    groups: &[String],
    reference: &str,
    pca: &PcaModel,
) -> Result<AlignedProjection> {
    let r = groups
        .iter()
        .position(|g| g == reference)
        .ok_or_else(|| Error::Pca(format!("reference group {reference} missing")))?;
    let mut models = Vec::with_capacity(projections.len());
    for p in projections {
        if p.coordinates.rows() != groups.len() {
            return Err(Error::Pca(format!(
                "model {} has {} rows for {} groups",
                p.model,
                p.coordinates.rows(),
                groups.len()
            )));
        }
        let origin = p.coordinates.row(r).to_vec();
        let mut c = p.coordinates.clone();
        for i in 0..c.rows() {
            for (v, o) in c.row_mut(i).iter_mut().zip(&origin) {
                *v -= o;
            }
        }
        // exact zeros, not x - x rounding
        c.row_mut(r).iter_mut().for_each(|v| *v = 0.0);
        models.push(ModelProjection {
            model: p.model.clone(),
            coordinates: c,
        });
    }
    Ok(AlignedProjection {
        reference: reference.to_string(),
        groups: groups.to_vec(),
        models,
        explained_variance_ratios: pca.explained_variance_ratios.clone(),
        pca: pca.clone(),
    })
}

/// Components per model matrix: at most 3 and at most `G - 1`.
pub fn model_components(n_groups: usize) -> usize {
    n_groups.saturating_sub(1).min(3)
}

/// Fit on `fit_model`'s rows of `m`, project every model, align on `reference`.
pub fn aligned_model_pca(m: &MetricsMatrix, fit_model: &str, reference: &str) -> Result<AlignedProjection> {
    let groups: Vec<String> = m.groups().iter().map(|s| s.to_string()).collect();
    let k = model_components(groups.len());
    let base = m.per_model_matrix(fit_model)?;
    let pca = fit_pca(&base.values, k, fit_model)?;
    let mut projections = Vec::new();
    for model in m.models() {
        let sub = m.per_model_matrix(model)?;
        projections.push(ModelProjection {
            model: model.to_string(),
            coordinates: project(&sub.values, &pca)?,
        });
    }
    align_to_reference(&projections, &groups, reference, &pca)
}

/// PCA of the whole `I x J` matrix keeping `min(I - 1, J)` components.
pub fn full_matrix_pca(m: &MetricsMatrix) -> Result<PcaModel> {
    let k = m.values.rows().saturating_sub(1).min(m.values.cols());
    fit_pca(&m.values, k.max(1), "all")
}
