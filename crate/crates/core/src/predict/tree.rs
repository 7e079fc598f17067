//! CART regression tree (squared-error splits), shared by the forest and the
//! boosted ensemble.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 4,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Builder<'a, R> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

fn mean_of(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let value = mean_of(self.y, idx);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf(value));
        if depth >= self.params.max_depth || idx.len() < 2 * self.params.min_samples_leaf.max(1) {
            return slot;
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return slot;
        };
        let x = self.x;
        let mid = partition(idx, |i| x[[i, feature]] <= threshold);
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.ncols();
        match self.params.max_features {
            Some(k) if k < p => {
                let mut f = sample(self.rng, p, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for feature in self.candidate_features() {
            let col = self.x.column(feature);
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += self.y[order[k]];
                let nl = k + 1;
                let nr = n - nl;
                let (v, next) = (col[order[k]], col[order[k + 1]]);
                if nl < min_leaf || nr < min_leaf || v == next {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64;
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, feature, v + (next - v) / 2.0));
                }
            }
        }
        best.and_then(|(score, f, t)| {
            (score > parent + 1e-12 * parent.abs().max(1.0)).then_some((f, t))
        })
    }
}

/// Stable partition; returns the number of elements satisfying `pred`.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let k = yes.len();
    idx[..k].copy_from_slice(&yes);
    idx[k..].copy_from_slice(&no);
    k
}

impl RegressionTree {
    /// Fits on the rows listed in `rows` (duplicates allowed, as in a
    /// bootstrap sample).
    pub fn fit<R: Rng>(
        x: ArrayView2<'_, f64>,
        y: &[f64],
        rows: &[usize],
        params: TreeParams,
        rng: &mut R,
    ) -> Self {
        assert!(!rows.is_empty(), "tree needs at least one row");
        let mut idx = rows.to_vec();
        let mut b = Builder {
            x,
            y,
            params,
            rng,
            nodes: Vec::new(),
        };
        b.grow(&mut idx, 0);
        RegressionTree { nodes: b.nodes }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf(_)))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn d(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + d(nodes, *left).max(d(nodes, *right)),
            }
        }
        d(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stump_is_mean() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [1.0, 2.0, 3.0, 6.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = RegressionTree::fit(
            x.view(),
            &y,
            &[0, 1, 2, 3],
            TreeParams {
                max_depth: 0,
                ..Default::default()
            },
            &mut rng,
        );
        assert_eq!(t.predict_row(&[10.0]), 3.0);
        assert_eq!(t.n_leaves(), 1);
    }

    #[test]
    fn finds_step() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]];
        let y = [1.0, 1.0, 1.0, 4.0, 4.0, 4.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = RegressionTree::fit(
            x.view(),
            &y,
            &[0, 1, 2, 3, 4, 5],
            TreeParams::default(),
            &mut rng,
        );
        assert_eq!(t.predict_row(&[2.4]), 1.0);
        assert_eq!(t.predict_row(&[2.6]), 4.0);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn identical_rows_give_leaf() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let y = [1.0, 2.0, 4.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = RegressionTree::fit(x.view(), &y, &[0, 1, 2], TreeParams::default(), &mut rng);
        assert_eq!(t.n_leaves(), 1);
        assert!((t.predict_row(&[1.0, 2.0]) - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn min_leaf_respected() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [0.0, 0.0, 0.0, 10.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = RegressionTree::fit(
            x.view(),
            &y,
            &[0, 1, 2, 3],
            TreeParams {
                min_samples_leaf: 2,
                ..Default::default()
            },
            &mut rng,
        );
        // The only split isolating row 3 is forbidden; the best allowed is 2|2.
        assert_eq!(t.predict_row(&[3.0]), 5.0);
    }
}
