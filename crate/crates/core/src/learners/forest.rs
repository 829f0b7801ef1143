//! Bagged CART ensembles with per-node feature subsampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::linear::check_xy;
use crate::learners::tree::{grow, DecisionTree, TreeParams};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features considered at each split; `None` means `max(1, d / 3)`.
    #[serde(default)]
    pub max_features: Option<usize>,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "one")]
    pub min_samples_leaf: usize,
    #[serde(default = "yes")]
    pub bootstrap: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn resolved_max_features(&self, d: usize) -> usize {
        self.max_features.unwrap_or((d / 3).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_trees: usize,
    pub max_features: usize,
    pub seed: u64,
}

impl RandomForest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

pub fn fit_random_forest(
    x: &Matrix,
    y: &[f64],
    params: ForestParams,
    seed: u64,
) -> Result<RandomForest> {
    check_xy(x, y)?;
    let d = x.cols();
    let max_features = params.resolved_max_features(d);
    if params.n_trees == 0 {
        return Err(Error::invalid("n_trees must be at least 1"));
    }
    if max_features == 0 || max_features > d {
        return Err(Error::invalid(format!(
            "max_features {max_features} outside 1..={d}"
        )));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
    };
    let n = x.rows();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, t as u64);
            let idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| r.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(x, y, idx, tree_params, Some(&mut r), max_features)
        })
        .collect();
    Ok(RandomForest {
        trees,
        n_trees: params.n_trees,
        max_features,
        seed,
    })
}

pub fn predict_forest(model: &RandomForest, x: &Matrix) -> Vec<f64> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::fit_cart;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn data(seed: u64, n: usize, d: usize) -> (Matrix, Vec<f64>) {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();
        let y = rows.iter().map(|v| v[0] * 2.0 - v[d - 1] + r.random_range(-0.1..0.1)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn single_full_tree_without_bootstrap_is_cart() {
        let (x, y) = data(3, 40, 3);
        let p = ForestParams {
            n_trees: 1,
            max_features: Some(3),
            bootstrap: false,
            ..Default::default()
        };
        let f = fit_random_forest(&x, &y, p, 9).unwrap();
        let t = fit_cart(&x, &y, TreeParams::default()).unwrap();
        assert_eq!(f.predict(&x), t.predict(&x));
    }

    #[test]
    fn constant_target() {
        let (x, _) = data(1, 20, 2);
        let y = vec![2.5; 20];
        for seed in [0, 1, 77] {
            let f = fit_random_forest(&x, &y, ForestParams { n_trees: 5, ..Default::default() }, seed)
                .unwrap();
            assert!(f.predict(&x).iter().all(|&p| p == 2.5));
        }
    }

    #[test]
    fn same_seed_bitwise_identical() {
        let (x, y) = data(2, 60, 4);
        let p = ForestParams { n_trees: 12, ..Default::default() };
        let a = fit_random_forest(&x, &y, p, 42).unwrap().predict(&x);
        let b = fit_random_forest(&x, &y, p, 42).unwrap().predict(&x);
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let c = fit_random_forest(&x, &y, p, 43).unwrap().predict(&x);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_params() {
        let (x, y) = data(2, 10, 2);
        let p = ForestParams { n_trees: 0, ..Default::default() };
        assert!(fit_random_forest(&x, &y, p, 0).is_err());
        let p = ForestParams { max_features: Some(3), ..Default::default() };
        assert!(fit_random_forest(&x, &y, p, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn predictions_within_target_range(seed in 0u64..1000, n in 5usize..30) {
            let (x, y) = data(seed, n, 3);
            let f = fit_random_forest(&x, &y, ForestParams { n_trees: 4, ..Default::default() }, seed).unwrap();
            let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let (q, _) = data(seed + 1, 10, 3);
            for p in f.predict(&q) {
                prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
            }
        }
    }
}
