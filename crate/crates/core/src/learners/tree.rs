//! CART regression trees grown greedily on squared error.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::learners::linear::check_xy;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    pub params: TreeParams,
    n_features: usize,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

pub fn fit_cart(x: &Matrix, y: &[f64], params: TreeParams) -> Result<DecisionTree> {
    check_xy(x, y)?;
    let idx: Vec<usize> = (0..x.rows()).collect();
    Ok(grow(x, y, idx, params, None::<&mut rand_chacha::ChaCha8Rng>, x.cols()))
}

pub fn predict_tree(tree: &DecisionTree, x: &Matrix) -> Vec<f64> {
    tree.predict(x)
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Grows a tree on the (possibly repeated) row indices `idx`. With an RNG,
/// each node considers `max_features` features drawn without replacement.
pub(crate) fn grow<R: Rng>(
    x: &Matrix,
    y: &[f64],
    idx: Vec<usize>,
    params: TreeParams,
    mut rng: Option<&mut R>,
    max_features: usize,
) -> DecisionTree {
    let mut nodes = Vec::new();
    let min_leaf = params.min_samples_leaf.max(1);
    // stack of (node slot, rows, depth)
    nodes.push(Node::Leaf { value: 0.0 });
    let mut stack = vec![(0usize, idx, 0usize)];
    while let Some((slot, rows, depth)) = stack.pop() {
        let n = rows.len() as f64;
        let sum: f64 = rows.iter().map(|&i| y[i]).sum();
        let mean = sum / n;
        let sse: f64 = rows.iter().map(|&i| (y[i] - mean).powi(2)).sum();
        let can_split = rows.len() >= 2 * min_leaf
            && params.max_depth.is_none_or(|d| depth < d)
            && sse > 0.0;
        let best = if can_split {
            let features = match rng.as_deref_mut() {
                Some(r) if max_features < x.cols() => {
                    let mut f = sample(r, x.cols(), max_features).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => (0..x.cols()).collect(),
            };
            best_split(x, y, &rows, &features, min_leaf, sum)
                .filter(|c| c.gain > 1e-12 * sse)
        } else {
            None
        };
        match best {
            None => nodes[slot] = Node::Leaf { value: mean },
            Some(c) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| x.get(i, c.feature) < c.threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                let right = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[slot] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                stack.push((right, r, depth + 1));
                stack.push((left, l, depth + 1));
            }
        }
    }
    DecisionTree {
        nodes,
        params,
        n_features: x.cols(),
    }
}

/// Largest SSE reduction over midpoints between consecutive distinct values.
/// Ties keep the lowest feature index, then the smallest threshold.
fn best_split(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
    total: f64,
) -> Option<Candidate> {
    let n = rows.len();
    let base = total * total / n as f64;
    let mut best: Option<Candidate> = None;
    let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &f in features {
        order.clear();
        order.extend(rows.iter().map(|&i| (x.get(i, f), y[i])));
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += order[k].1;
            let n_left = k + 1;
            if order[k].0 == order[k + 1].0 || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64
                + right_sum * right_sum / (n - n_left) as f64
                - base;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    feature: f,
                    threshold: 0.5 * (order[k].0 + order[k + 1].0),
                    gain,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_rows(&v.iter().map(|x| [*x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn constant_target_single_leaf() {
        let x = col(&[1.0, 2.0, 3.0]);
        let t = fit_cart(&x, &[4.0, 4.0, 4.0], TreeParams::default()).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { value: 4.0 }]);
    }

    #[test]
    fn step_stump_at_midpoint() {
        let x = col(&[-2.0, -1.0, 1.0, 3.0]);
        let y = [0.0, 0.0, 1.0, 1.0];
        let t = fit_cart(
            &x,
            &y,
            TreeParams {
                max_depth: Some(1),
                min_samples_leaf: 1,
            },
        )
        .unwrap();
        match &t.nodes()[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.0);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(t.predict(&col(&[-0.5, 0.0, 2.0])), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn min_leaf_equal_n_gives_root() {
        let x = col(&[1.0, 2.0, 3.0, 4.0]);
        let y = [1.0, 2.0, 3.0, 10.0];
        let t = fit_cart(
            &x,
            &y,
            TreeParams {
                max_depth: None,
                min_samples_leaf: 4,
            },
        )
        .unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { value: 4.0 }]);
    }

    #[test]
    fn split_ties_prefer_lower_feature() {
        // both features separate the targets identically
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let t = fit_cart(&x, &[0.0, 1.0], TreeParams::default()).unwrap();
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn full_tree_fits_training_data() {
        let x = col(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let y = [3.0, -1.0, 4.0, 1.0, 5.0];
        let t = fit_cart(&x, &y, TreeParams::default()).unwrap();
        assert_eq!(t.predict(&x), y.to_vec());
        assert!(t.depth() >= 2);
    }
}
