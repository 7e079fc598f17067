//! Random forest and gradient-boosted trees on top of [`RegressionTree`].

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::Count(k) => k.clamp(1, p.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    /// Train each tree on a bootstrap sample of the rows.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            max_depth: 4,
            max_features: MaxFeatures::Sqrt,
            min_samples_leaf: 2,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<RegressionTree>,
}

impl RandomForest {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[f64], params: &ForestParams, seed: u64) -> Self {
        let n = x.nrows();
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            max_features: Some(params.max_features.resolve(x.ncols())),
        };
        let trees = (0..params.n_trees.max(1))
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::fit(x, y, &rows, tree_params, &mut rng)
            })
            .collect();
        RandomForest { trees }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_trees: 100,
            max_depth: 2,
            learning_rate: 0.1,
            min_samples_leaf: 1,
        }
    }
}

/// Least-squares gradient boosting: start from the mean, then fit each tree
/// to the current residuals and add it scaled by the learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBoosting {
    init: f64,
    learning_rate: f64,
    trees: Vec<RegressionTree>,
}

impl GradientBoosting {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[f64], params: &GbtParams, seed: u64) -> Self {
        let n = x.nrows();
        let init = y.iter().sum::<f64>() / n as f64;
        let mut pred = vec![init; n];
        let rows: Vec<usize> = (0..n).collect();
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            max_features: None,
        };
        // Trees use every feature, so the RNG is only a formality.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            let residual: Vec<f64> = y.iter().zip(&pred).map(|(t, p)| t - p).collect();
            let tree = RegressionTree::fit(x, &residual, &rows, tree_params, &mut rng);
            for (i, p) in pred.iter_mut().enumerate() {
                let row = x.row(i);
                *p += params.learning_rate
                    * tree.predict_row(row.as_slice().expect("standard layout"));
            }
            trees.push(tree);
        }
        GradientBoosting {
            init,
            learning_rate: params.learning_rate,
            trees,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy(n: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-2.0..2.0));
        let y = x
            .rows()
            .into_iter()
            .map(|r| 2.5 + r[0] - 0.5 * r[1] * r[1] + 0.1 * rng.random_range(-1.0..1.0))
            .collect();
        (x, y)
    }

    #[test]
    fn single_unbagged_stump_is_training_mean() {
        let (x, y) = toy(20, 1);
        let params = ForestParams {
            n_trees: 1,
            max_depth: 0,
            bootstrap: false,
            ..Default::default()
        };
        let f = RandomForest::fit(x.view(), &y, &params, 3);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        for r in x.rows() {
            assert!((f.predict_row(r.as_slice().unwrap()) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn boosting_one_full_step_equals_one_tree() {
        let (x, y) = toy(30, 2);
        let params = GbtParams {
            n_trees: 1,
            learning_rate: 1.0,
            max_depth: 3,
            min_samples_leaf: 1,
        };
        let gbt = GradientBoosting::fit(x.view(), &y, &params, 0);
        let rows: Vec<usize> = (0..30).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = RegressionTree::fit(
            x.view(),
            &y,
            &rows,
            TreeParams {
                max_depth: 3,
                min_samples_leaf: 1,
                max_features: None,
            },
            &mut rng,
        );
        for r in x.rows() {
            let r = r.as_slice().unwrap();
            assert!((gbt.predict_row(r) - tree.predict_row(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn boosting_reduces_training_error() {
        let (x, y) = toy(40, 3);
        let mse = |m: &GradientBoosting| {
            x.rows()
                .into_iter()
                .zip(&y)
                .map(|(r, t)| (m.predict_row(r.as_slice().unwrap()) - t).powi(2))
                .sum::<f64>()
        };
        let few = GradientBoosting::fit(
            x.view(),
            &y,
            &GbtParams {
                n_trees: 5,
                ..Default::default()
            },
            0,
        );
        let many = GradientBoosting::fit(x.view(), &y, &GbtParams::default(), 0);
        assert!(mse(&many) < mse(&few));
    }

    #[test]
    fn forest_is_deterministic() {
        let (x, y) = toy(25, 4);
        let p = ForestParams {
            n_trees: 20,
            ..Default::default()
        };
        assert_eq!(
            RandomForest::fit(x.view(), &y, &p, 9),
            RandomForest::fit(x.view(), &y, &p, 9)
        );
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(4), 2);
        assert_eq!(MaxFeatures::Sqrt.resolve(2), 1);
        assert_eq!(MaxFeatures::All.resolve(4), 4);
        assert_eq!(MaxFeatures::Count(9).resolve(4), 4);
    }
}
