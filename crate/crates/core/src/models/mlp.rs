use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive_seed, rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// Hidden widths are `P * F` and `(P + 1) * F` for `F` input features.
    pub width_multiplier: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight decay on weight matrices (biases are not penalized).
    pub l2: f64,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl MlpParams {
    pub fn with_width(width_multiplier: usize) -> Self {
        MlpParams {
            width_multiplier,
            epochs: 100,
            batch_size: 64,
            l2: 0.01,
            learning_rate: 0.01,
            momentum: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    w: Array2<f64>,
    b: Array1<f64>,
}

/// Feed-forward network: ReLU hidden layers and one sigmoid output unit,
/// trained on binary cross-entropy with minibatch SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Gradients {
    w: Vec<Array2<f64>>,
    b: Vec<Array1<f64>>,
}

impl Mlp {
    /// Network with the given layer widths, including input and output
    /// (which must be 1). Weights and biases start at `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(widths: &[usize], rng: &mut Rng) -> Self {
        assert!(widths.len() >= 2 && widths[widths.len() - 1] == 1);
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Dense {
                    w: Array2::from_shape_fn((w[0], w[1]), |_| rng.gen_range(-bound..bound)),
                    b: Array1::from_shape_fn(w[1], |_| rng.gen_range(-bound..bound)),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].w.nrows()];
        w.extend(self.layers.iter().map(|l| l.w.ncols()));
        w
    }

    /// Pre-activations of every layer.
    fn forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = act.dot(&layer.w) + &layer.b;
            if i + 1 < self.layers.len() {
                act = z.mapv(|v| v.max(0.0));
            }
            pre.push(z);
        }
        pre
    }

    /// Mean cross-entropy plus `l2/2 * sum |W|^2`, and its gradient.
    pub(crate) fn loss_and_gradients(
        &self,
        x: ArrayView2<f64>,
        y: &[f64],
        l2: f64,
    ) -> (f64, Gradients) {
        let n = x.nrows() as f64;
        let pre = self.forward(x);
        let logits = pre.last().expect("at least one layer").column(0).to_owned();
        let mut loss = logits
            .iter()
            .zip(y)
            .map(|(&z, &t)| super::softplus(z) - t * z)
            .sum::<f64>()
            / n;
        loss += 0.5 * l2 * self.layers.iter().map(|l| l.w.iter().map(|v| v * v).sum::<f64>()).sum::<f64>();

        let mut delta = Array2::from_shape_fn((x.nrows(), 1), |(i, _)| (sigmoid(logits[i]) - y[i]) / n);
        let depth = self.layers.len();
        let mut gw = vec![Array2::zeros((0, 0)); depth];
        let mut gb = vec![Array1::zeros(0); depth];
        for i in (0..depth).rev() {
            let input = if i == 0 {
                x.to_owned()
            } else {
                pre[i - 1].mapv(|v| v.max(0.0))
            };
            gw[i] = input.t().dot(&delta) + &(&self.layers[i].w * l2);
            gb[i] = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].w.t());
                back.zip_mut_with(&pre[i - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
        }
        (loss, Gradients { w: gw, b: gb })
    }

    pub fn fit(x: &Matrix, y: &[bool], params: &MlpParams, seed: u64) -> Result<Self> {
        if params.width_multiplier == 0 || params.batch_size == 0 {
            return Err(Error::Training("mlp widths and batch size must be positive".into()));
        }
        let f = x.cols();
        let widths = [
            f,
            params.width_multiplier * f,
            (params.width_multiplier + 1) * f,
            1,
        ];
        let mut init = rng(derive_seed(seed, &[0]));
        let mut net = Mlp::new(&widths, &mut init);
        let mut shuffle = rng(derive_seed(seed, &[1]));

        let data = Array2::from_shape_vec((x.rows(), f), x.as_slice().to_vec())
            .map_err(|e| Error::Training(e.to_string()))?;
        let targets: Vec<f64> = y.iter().map(|&v| f64::from(u8::from(v))).collect();
        let mut order: Vec<usize> = (0..x.rows()).collect();
        let mut velocity: Option<Gradients> = None;

        for _ in 0..params.epochs {
            order.shuffle(&mut shuffle);
            for batch in order.chunks(params.batch_size) {
                let xb = data.select(Axis(0), batch);
                let yb: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
                let (loss, g) = net.loss_and_gradients(xb.view(), &yb, params.l2);
                if !loss.is_finite() {
                    return Err(Error::Training("mlp loss diverged".into()));
                }
                let v = match velocity.as_mut() {
                    Some(v) => {
                        for (vw, gw) in v.w.iter_mut().zip(&g.w) {
                            vw.zip_mut_with(gw, |a, &b| *a = params.momentum * *a + b);
                        }
                        for (vb, gb) in v.b.iter_mut().zip(&g.b) {
                            vb.zip_mut_with(gb, |a, &b| *a = params.momentum * *a + b);
                        }
                        &*v
                    }
                    None => velocity.insert(g),
                };
                for (layer, (vw, vb)) in net.layers.iter_mut().zip(v.w.iter().zip(&v.b)) {
                    layer.w.scaled_add(-params.learning_rate, vw);
                    layer.b.scaled_add(-params.learning_rate, vb);
                }
            }
        }
        Ok(net)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let view = ArrayView2::from_shape((x.rows(), x.cols()), x.as_slice()).expect("row-major");
        let pre = self.forward(view);
        pre.last()
            .expect("at least one layer")
            .column(0)
            .iter()
            .map(|&z| sigmoid(z))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flatten(net: &Mlp) -> Vec<f64> {
        net.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }

    fn unflatten(net: &mut Mlp, theta: &[f64]) {
        let mut it = theta.iter().copied();
        for l in &mut net.layers {
            l.w.iter_mut().for_each(|v| *v = it.next().unwrap());
            l.b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut r = rng(11);
        let x = Array2::from_shape_fn((8, 2), |_| r.gen_range(-1.5..1.5));
        let y: Vec<f64> = (0..8).map(|i| f64::from(i % 3 == 0)).collect();
        for seed in 0..5 {
            let mut net = Mlp::new(&[2, 3, 3, 1], &mut rng(seed));
            let (_, g) = net.loss_and_gradients(x.view(), &y, 0.01);
            let analytic: Vec<f64> = g
                .w
                .iter()
                .zip(&g.b)
                .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
                .collect();
            let theta = flatten(&net);
            for i in 0..theta.len() {
                let h = 1e-6;
                let mut t = theta.clone();
                t[i] += h;
                unflatten(&mut net, &t);
                let up = net.loss_and_gradients(x.view(), &y, 0.01).0;
                t[i] -= 2.0 * h;
                unflatten(&mut net, &t);
                let down = net.loss_and_gradients(x.view(), &y, 0.01).0;
                unflatten(&mut net, &theta);
                let fd = (up - down) / (2.0 * h);
                let rel = (fd - analytic[i]).abs() / analytic[i].abs().max(1e-6);
                assert!(rel < 1e-4, "seed {seed} param {i}: fd {fd} vs {}", analytic[i]);
            }
        }
    }

    #[test]
    fn architecture_uses_both_hidden_widths() {
        let x = Matrix::from_rows(&[vec![0.0, 1.0, 0.5], vec![1.0, 0.0, -0.5]]).unwrap();
        let p = MlpParams {
            epochs: 1,
            ..MlpParams::with_width(2)
        };
        let net = Mlp::fit(&x, &[true, false], &p, 0).unwrap();
        assert_eq!(net.widths(), vec![3, 6, 9, 1]);
    }

    #[test]
    fn learns_a_simple_boundary() {
        let mut r = rng(4);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)])
            .collect();
        let y: Vec<bool> = rows.iter().map(|v| v[0] + v[1] > 0.0).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = MlpParams {
            epochs: 30,
            ..MlpParams::with_width(2)
        };
        let net = Mlp::fit(&x, &y, &p, 1).unwrap();
        let acc = net
            .predict(&x)
            .iter()
            .zip(&y)
            .filter(|(s, &t)| (**s >= 0.5) == t)
            .count() as f64
            / 400.0;
        assert!(acc > 0.9, "accuracy {acc}");
    }
}
