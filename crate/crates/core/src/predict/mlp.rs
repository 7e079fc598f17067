//! One-hidden-layer tanh perceptron with a linear output, trained by
//! full-batch gradient descent on half mean squared error.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 16,
            learning_rate: 0.01,
            epochs: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// hidden × inputs
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array1<f64>,
    b2: f64,
}

impl Mlp {
    /// Glorot-uniform weights, zero hidden biases, output bias at `y_mean`.
    pub fn init(inputs: usize, hidden: usize, y_mean: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        Mlp {
            w1: Array2::from_shape_fn((hidden, inputs), |_| rng.random_range(-a1..=a1)),
            b1: Array1::zeros(hidden),
            w2: Array1::from_shape_fn(hidden, |_| rng.random_range(-a2..=a2)),
            b2: y_mean,
        }
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Parameters flattened as `[w1 (row-major), b1, w2, b2]`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend(self.w1.iter());
        p.extend(self.b1.iter());
        p.extend(self.w2.iter());
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.iter_mut().zip(a).for_each(|(w, v)| *w = *v);
        self.b1.iter_mut().zip(b).for_each(|(w, v)| *w = *v);
        self.w2.iter_mut().zip(c).for_each(|(w, v)| *w = *v);
        self.b2 = d[0];
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let x = ndarray::ArrayView1::from(row);
        let h = (self.w1.dot(&x) + &self.b1).mapv(f64::tanh);
        h.dot(&self.w2) + self.b2
    }

    /// `L = (1/2n)·Σ (ŷ − y)²` and its gradient in [`Mlp::params`] order.
    pub fn loss_and_grad(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> (f64, Vec<f64>) {
        let n = x.nrows() as f64;
        // Forward pass for all rows: pre (n × hidden).
        let pre = x.dot(&self.w1.t()) + &self.b1;
        let h = pre.mapv(f64::tanh);
        let out = h.dot(&self.w2) + self.b2;
        let err: Array1<f64> = out.iter().zip(y).map(|(o, t)| (o - t) / n).collect();
        let loss = out
            .iter()
            .zip(y)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>()
            / (2.0 * n);

        let g_b2 = err.sum();
        let g_w2 = h.t().dot(&err);
        // dL/dpre = err ⊗ w2 ⊙ (1 − h²)
        let mut delta = h.mapv(|v| 1.0 - v * v);
        for (mut row, e) in delta.rows_mut().into_iter().zip(err.iter()) {
            row *= *e;
            row *= &self.w2;
        }
        let g_w1 = delta.t().dot(&x);
        let g_b1 = delta.sum_axis(ndarray::Axis(0));

        let mut g = Vec::with_capacity(self.n_params());
        g.extend(g_w1.iter());
        g.extend(g_b1.iter());
        g.extend(g_w2.iter());
        g.push(g_b2);
        (loss, g)
    }

    /// Trains in place; returns the loss before each epoch's update.
    pub fn train(&mut self, x: ArrayView2<'_, f64>, y: &[f64], params: &MlpParams) -> Vec<f64> {
        let mut history = Vec::with_capacity(params.epochs);
        let mut p = self.params();
        for _ in 0..params.epochs {
            let (loss, g) = self.loss_and_grad(x, y);
            history.push(loss);
            p.iter_mut()
                .zip(&g)
                .for_each(|(w, gi)| *w -= params.learning_rate * gi);
            self.set_params(&p);
        }
        history
    }

    pub fn fit(x: ArrayView2<'_, f64>, y: &[f64], params: &MlpParams, seed: u64) -> Self {
        let y_mean = y.iter().sum::<f64>() / y.len() as f64;
        let mut m = Mlp::init(x.ncols(), params.hidden.max(1), y_mean, seed);
        m.train(x, y, params);
        m
    }
}
