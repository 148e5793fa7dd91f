use serde::{Deserialize, Serialize};

use super::{sigmoid, softplus};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitParams {
    /// Inverse regularization strength.
    pub c: f64,
}

pub const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_ITERATIONS: usize = 200;

/// L2-regularized logistic regression.
///
/// Minimizes `mean(cross_entropy) + |w|^2 / (2 C n)` (the bias is not
/// penalized) by damped Newton steps with Armijo backtracking, until the
/// gradient norm drops below [`GRADIENT_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

/// Objective and gradient at `params = [w..., b]`.
pub(crate) fn objective_and_gradient(
    params: &[f64],
    x: &Matrix,
    y: &[bool],
    c: f64,
) -> (f64, Vec<f64>) {
    let f = x.cols();
    let n = x.rows() as f64;
    let (w, b) = (&params[..f], params[f]);
    let lambda = 1.0 / (c * n);
    let mut loss = 0.0;
    let mut grad = vec![0.0; f + 1];
    for (row, &yi) in x.iter_rows().zip(y) {
        let z = b + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        let t = f64::from(u8::from(yi));
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, a) in grad[..f].iter_mut().zip(row) {
            *g += r * a;
        }
        grad[f] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    loss += 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    for (g, wi) in grad[..f].iter_mut().zip(w) {
        *g += lambda * wi;
    }
    (loss, grad)
}

fn hessian(params: &[f64], x: &Matrix, c: f64) -> Vec<f64> {
    let f = x.cols();
    let d = f + 1;
    let n = x.rows() as f64;
    let mut h = vec![0.0; d * d];
    let mut ext = vec![1.0; d];
    for row in x.iter_rows() {
        ext[..f].copy_from_slice(row);
        let z = params[f] + row.iter().zip(&params[..f]).map(|(a, b)| a * b).sum::<f64>();
        let p = sigmoid(z);
        let s = p * (1.0 - p);
        for i in 0..d {
            let si = s * ext[i];
            for j in 0..=i {
                h[i * d + j] += si * ext[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            h[i * d + j] /= n;
            h[j * d + i] = h[i * d + j];
        }
    }
    let lambda = 1.0 / (c * n);
    for i in 0..f {
        h[i * d + i] += lambda;
    }
    // keeps the bias pivot positive on separable data
    h[f * d + f] += 1e-12;
    h
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl LogisticRegression {
    pub fn fit(x: &Matrix, y: &[bool], params: &LogitParams) -> Result<Self> {
        if !(params.c > 0.0) {
            return Err(Error::Training(format!("invalid C = {}", params.c)));
        }
        let d = x.cols() + 1;
        let mut theta = vec![0.0; d];
        let (mut loss, mut grad) = objective_and_gradient(&theta, x, y, params.c);
        let mut iterations = 0;
        while norm(&grad) > GRADIENT_TOLERANCE && iterations < MAX_ITERATIONS {
            iterations += 1;
            let h = hessian(&theta, x, params.c);
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            // fall back to steepest descent if the Hessian is not numerically SPD
            let dir = cholesky_solve(&h, &neg, d).unwrap_or(neg);
            let slope: f64 = dir.iter().zip(&grad).map(|(a, b)| a * b).sum();
            let mut step = 1.0;
            loop {
                let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, s)| t + step * s).collect();
                let (l, g) = objective_and_gradient(&cand, x, y, params.c);
                if l.is_finite() && l <= loss + 1e-4 * step * slope {
                    theta = cand;
                    loss = l;
                    grad = g;
                    break;
                }
                step *= 0.5;
                if step < 1e-16 {
                    // no further decrease is representable
                    return Ok(Self::from_theta(theta, iterations));
                }
            }
            if !loss.is_finite() {
                return Err(Error::Training("logit objective diverged".into()));
            }
        }
        Ok(Self::from_theta(theta, iterations))
    }

    fn from_theta(mut theta: Vec<f64>, iterations: usize) -> Self {
        let bias = theta.pop().unwrap_or(0.0);
        LogisticRegression {
            weights: theta,
            bias,
            iterations,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows()
            .map(|row| {
                sigmoid(self.bias + row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())
            })
            .collect()
    }
}
