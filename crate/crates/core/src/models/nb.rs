use crate::error::{Error, Result};
use crate::linalg::{mean, population_variance, Matrix};

const VAR_SMOOTHING: f64 = 1e-9;

/// Gaussian naive Bayes with per-class feature means and variances.
///
/// Every variance is inflated by `1e-9` times the largest feature variance so
/// constant columns stay usable.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    log_prior: [f64; 2],
    means: [Vec<f64>; 2],
    vars: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn fit(x: &Matrix, y: &[bool]) -> Result<Self> {
        let n = x.rows();
        let n_pos = y.iter().filter(|&&v| v).count();
        if n_pos == 0 || n_pos == n {
            return Err(Error::SingleClass);
        }
        let epsilon = VAR_SMOOTHING
            * (0..x.cols())
                .map(|j| population_variance(&x.column(j)))
                .fold(0.0, f64::max);
        let mut means: [Vec<f64>; 2] = Default::default();
        let mut vars: [Vec<f64>; 2] = Default::default();
        for class in 0..2 {
            let rows: Vec<usize> = (0..n).filter(|&i| usize::from(y[i]) == class).collect();
            let sub = x.select_rows(&rows);
            for j in 0..x.cols() {
                let col = sub.column(j);
                means[class].push(mean(&col));
                vars[class].push(population_variance(&col) + epsilon);
            }
        }
        if vars.iter().flatten().any(|&v| v <= 0.0) {
            return Err(Error::Training("naive Bayes: all features constant".into()));
        }
        let n = n as f64;
        Ok(GaussianNb {
            log_prior: [((n - n_pos as f64) / n).ln(), (n_pos as f64 / n).ln()],
            means,
            vars,
        })
    }

    fn joint_log_likelihood(&self, row: &[f64], class: usize) -> f64 {
        let ll: f64 = row
            .iter()
            .zip(&self.means[class])
            .zip(&self.vars[class])
            .map(|((x, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v))
            .sum();
        self.log_prior[class] + ll
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows()
            .map(|row| {
                let d = self.joint_log_likelihood(row, 0) - self.joint_log_likelihood(row, 1);
                // P(1 | x) = 1 / (1 + exp(l0 - l1))
                super::sigmoid(-d)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_classes_meet_halfway() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = [false, false, true, true];
        let m = GaussianNb::fit(&x, &y).unwrap();
        let q = Matrix::from_rows(&[vec![1.5], vec![1.0], vec![2.0]]).unwrap();
        let s = m.predict(&q);
        assert!((s[0] - 0.5).abs() < 1e-12);
        assert!(s[1] < 0.5 && s[2] > 0.5);
    }

    #[test]
    fn unit_gaussians_at_zero_and_three_split_near_one_and_a_half() {
        use rand::Rng;
        let mut r = crate::rng::rng(21);
        let normal = |r: &mut crate::rng::Rng| {
            // Box-Muller
            let (u, v): (f64, f64) = (r.gen_range(f64::EPSILON..1.0), r.gen());
            (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
        };
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..4000 {
            let pos = i % 2 == 1;
            rows.push(vec![normal(&mut r) + if pos { 3.0 } else { 0.0 }]);
            y.push(pos);
        }
        let m = GaussianNb::fit(&Matrix::from_rows(&rows).unwrap(), &y).unwrap();
        // closed form: the log-odds is quadratic in x; find its root between the means
        let (m0, m1) = (m.means[0][0], m.means[1][0]);
        let (v0, v1) = (m.vars[0][0], m.vars[1][0]);
        let a = 0.5 * (1.0 / v0 - 1.0 / v1);
        let b = m1 / v1 - m0 / v0;
        let c = 0.5 * (m0 * m0 / v0 - m1 * m1 / v1) + 0.5 * (v0 / v1).ln();
        let root = if a.abs() < 1e-12 {
            -c / b
        } else {
            let d = (b * b - 4.0 * a * c).sqrt();
            [(-b + d) / (2.0 * a), (-b - d) / (2.0 * a)]
                .into_iter()
                .find(|x| (m0..m1).contains(x))
                .unwrap()
        };
        assert!((root - 1.5).abs() < 0.1, "root {root}");
        let s = m.predict(&Matrix::from_rows(&[vec![root]]).unwrap());
        assert!((s[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn priors_shift_the_boundary() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = [false, false, false, false, true, true];
        let m = GaussianNb::fit(&x, &y).unwrap();
        let s = m.predict(&Matrix::from_rows(&[vec![1.5]]).unwrap());
        assert!(s[0] < 0.5);
    }

    #[test]
    fn constant_feature_is_smoothed() {
        let x = Matrix::from_rows(&[vec![0.0, 5.0], vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let m = GaussianNb::fit(&x, &[false, false, true, true]).unwrap();
        assert!(m.predict(&x).iter().all(|s| s.is_finite()));
    }
}
