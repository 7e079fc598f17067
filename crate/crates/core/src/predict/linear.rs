//! Linear models: Lasso by cyclic coordinate descent and an ε-insensitive
//! linear SVR trained by subgradient descent.

use ndarray::{Array1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub coef: Array1<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(c, v)| c * v).sum::<f64>()
    }
}

// ---------------------------------------------------------------------------
// Lasso
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaChoice {
    Fixed(f64),
    /// Log-spaced grid from λ_max down to `min_ratio · λ_max`, picked by
    /// out-of-bag error over inner bootstrap resamples.
    Grid {
        n_lambdas: usize,
        min_ratio: f64,
        inner_replicates: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoParams {
    pub lambda: LambdaChoice,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoParams {
    fn default() -> Self {
        LassoParams {
            lambda: LambdaChoice::Grid {
                n_lambdas: 20,
                min_ratio: 1e-3,
                inner_replicates: 20,
            },
            tol: 1e-10,
            max_sweeps: 100_000,
        }
    }
}

/// Centered copies of the design and target, plus the means removed.
struct Centered {
    x: ndarray::Array2<f64>,
    y: Array1<f64>,
    x_mean: Array1<f64>,
    y_mean: f64,
}

fn center(x: ArrayView2<'_, f64>, y: &[f64]) -> Centered {
    let x_mean = x.mean_axis(Axis(0)).expect("at least one row");
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    Centered {
        x: &x - &x_mean,
        y: Array1::from_iter(y.iter().map(|v| v - y_mean)),
        x_mean,
        y_mean,
    }
}

/// Smallest λ for which every coefficient is zero: `max_j |x_jᵀ(y − ȳ)| / n`.
pub fn lambda_max(x: ArrayView2<'_, f64>, y: &[f64]) -> f64 {
    let c = center(x, y);
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|j| (c.x.column(j).dot(&c.y) / n).abs())
        .fold(0.0, f64::max)
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// `(1/2n)·‖y − b − Xw‖² + λ‖w‖₁`.
pub fn lasso_objective(x: ArrayView2<'_, f64>, y: &[f64], m: &LinearModel, lambda: f64) -> f64 {
    let n = x.nrows() as f64;
    let sse: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(r, t)| {
            let e = t - m.intercept - r.dot(&m.coef);
            e * e
        })
        .sum();
    sse / (2.0 * n) + lambda * m.coef.iter().map(|c| c.abs()).sum::<f64>()
}

/// Coordinate descent with an unpenalized intercept. When `history` is given
/// the objective after every full sweep is appended to it.
pub fn lasso_fit(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    lambda: f64,
    tol: f64,
    max_sweeps: usize,
    mut history: Option<&mut Vec<f64>>,
) -> LinearModel {
    let (n, p) = x.dim();
    let c = center(x, y);
    let col_sq: Vec<f64> = (0..p)
        .map(|j| c.x.column(j).dot(&c.x.column(j)) / n as f64)
        .collect();
    let mut w = Array1::<f64>::zeros(p);
    let mut resid = c.y.clone();
    let finish = |w: &Array1<f64>| LinearModel {
        intercept: c.y_mean - c.x_mean.dot(w),
        coef: w.clone(),
    };
    for _ in 0..max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = c.x.column(j);
            let old = w[j];
            let rho = col.dot(&resid) / n as f64 + col_sq[j] * old;
            let new = soft_threshold(rho, lambda) / col_sq[j];
            if new != old {
                resid.scaled_add(old - new, &col);
                w[j] = new;
                max_delta = max_delta.max((new - old).abs());
            }
        }
        if let Some(h) = history.as_deref_mut() {
            h.push(lasso_objective(x, y, &finish(&w), lambda));
        }
        if max_delta <= tol {
            break;
        }
    }
    finish(&w)
}

pub fn lambda_grid(lmax: f64, n: usize, min_ratio: f64) -> Vec<f64> {
    if n <= 1 {
        return vec![lmax];
    }
    (0..n)
        .map(|k| lmax * min_ratio.powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Picks λ from the grid by pooled out-of-bag squared error over inner
/// bootstrap resamples. Ties go to the larger λ.
pub fn select_lambda(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    grid: &[f64],
    inner_replicates: usize,
    params: &LassoParams,
    seed: u64,
) -> f64 {
    let n = x.nrows();
    let mut sse = vec![0.0; grid.len()];
    for r in 0..inner_replicates {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let draw: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut in_bag = vec![false; n];
        draw.iter().for_each(|&i| in_bag[i] = true);
        let oob: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
        if oob.is_empty() {
            continue;
        }
        let xb = x.select(Axis(0), &draw);
        let yb: Vec<f64> = draw.iter().map(|&i| y[i]).collect();
        for (k, &lambda) in grid.iter().enumerate() {
            let m = lasso_fit(xb.view(), &yb, lambda, params.tol, params.max_sweeps, None);
            sse[k] += oob
                .iter()
                .map(|&i| {
                    let e = y[i] - m.predict_row(x.row(i).as_slice().expect("standard layout"));
                    e * e
                })
                .sum::<f64>();
        }
    }
    let mut best = 0;
    for k in 1..grid.len() {
        if sse[k] < sse[best] {
            best = k;
        }
    }
    grid[best]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lasso {
    pub model: LinearModel,
    pub lambda: f64,
}

impl Lasso {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[f64], params: &LassoParams, seed: u64) -> Self {
        let lambda = match params.lambda {
            LambdaChoice::Fixed(l) => l,
            LambdaChoice::Grid {
                n_lambdas,
                min_ratio,
                inner_replicates,
            } => {
                let lmax = lambda_max(x, y);
                if lmax == 0.0 {
                    0.0
                } else {
                    let grid = lambda_grid(lmax, n_lambdas, min_ratio);
                    select_lambda(x, y, &grid, inner_replicates, params, seed)
                }
            }
        };
        Lasso {
            model: lasso_fit(x, y, lambda, params.tol, params.max_sweeps, None),
            lambda,
        }
    }
}

// ---------------------------------------------------------------------------
// Linear SVR
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrParams {
    pub epsilon: f64,
    pub c: f64,
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            epsilon: 0.1,
            c: 1.0,
            steps: 2000,
            learning_rate: 0.1,
        }
    }
}

/// `(1/n)·(½‖w‖² + C·Σ max(0, |y − b − w·x| − ε))`; the 1/n scale leaves the
/// minimizer unchanged and keeps step sizes independent of n.
pub fn svr_objective(x: ArrayView2<'_, f64>, y: &[f64], m: &LinearModel, p: &SvrParams) -> f64 {
    let n = x.nrows() as f64;
    let loss: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(r, t)| ((t - m.intercept - r.dot(&m.coef)).abs() - p.epsilon).max(0.0))
        .sum();
    (0.5 * m.coef.dot(&m.coef) + p.c * loss) / n
}

/// Full-batch subgradient descent with step `lr/√t`, returning the iterate
/// with the lowest objective seen.
pub fn svr_fit(x: ArrayView2<'_, f64>, y: &[f64], p: &SvrParams) -> LinearModel {
    let (n, dim) = x.dim();
    let nf = n as f64;
    let mut m = LinearModel {
        coef: Array1::zeros(dim),
        intercept: y.iter().sum::<f64>() / nf,
    };
    let mut best = m.clone();
    let mut best_obj = svr_objective(x, y, &m, p);
    for t in 1..=p.steps {
        let mut gw = &m.coef / nf;
        let mut gb = 0.0;
        for (r, &target) in x.rows().into_iter().zip(y) {
            let resid = target - m.intercept - r.dot(&m.coef);
            if resid.abs() > p.epsilon {
                let s = resid.signum() * p.c / nf;
                gw.scaled_add(-s, &r);
                gb -= s;
            }
        }
        let eta = p.learning_rate / (t as f64).sqrt();
        m.coef.scaled_add(-eta, &gw);
        m.intercept -= eta * gb;
        let obj = svr_objective(x, y, &m, p);
        if obj < best_obj {
            best_obj = obj;
            best = m.clone();
        }
    }
    best
}
