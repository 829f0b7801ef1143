//! Probability models for 0/1 targets, used as members of ordinal wrappers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::forest::{fit_random_forest, ForestParams, RandomForest};
use crate::learners::linear::check_xy;
use crate::matrix::{dot, Matrix};

const LOGISTIC_MAX_ITER: usize = 2000;
const LOGISTIC_GRAD_TOL: f64 = 1e-8;
const DEGENERATE_CLIP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "base", rename_all = "snake_case")]
pub enum BinaryBase {
    Logistic {
        #[serde(default = "default_l2")]
        l2: f64,
    },
    Forest {
        #[serde(flatten)]
        params: ForestParams,
    },
}

fn default_l2() -> f64 {
    1e-4
}

impl Default for BinaryBase {
    fn default() -> Self {
        BinaryBase::Logistic { l2: default_l2() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinaryModel {
    Constant { p: f64 },
    Logistic { weights: Vec<f64>, bias: f64 },
    Forest { forest: RandomForest },
}

impl BinaryModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            BinaryModel::Constant { p } => *p,
            BinaryModel::Logistic { weights, bias } => sigmoid(dot(weights, row) + bias),
            BinaryModel::Forest { forest } => forest.predict_row(row).clamp(0.0, 1.0),
        }
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn fit_binary_prob(x: &Matrix, b: &[u8], base: BinaryBase, seed: u64) -> Result<BinaryModel> {
    if let Some(v) = b.iter().find(|&&v| v > 1) {
        return Err(Error::invalid(format!("binary target {v} not in {{0, 1}}")));
    }
    let yf: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    check_xy(x, &yf)?;
    let pos = b.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == b.len() {
        let p: f64 = if pos == 0 { 0.0 } else { 1.0 };
        return Ok(BinaryModel::Constant {
            p: p.clamp(DEGENERATE_CLIP, 1.0 - DEGENERATE_CLIP),
        });
    }
    match base {
        BinaryBase::Logistic { l2 } => {
            if !(l2 >= 0.0) {
                return Err(Error::invalid(format!("l2 = {l2} must be >= 0")));
            }
            let (weights, bias) = logistic(x, &yf, l2);
            Ok(BinaryModel::Logistic { weights, bias })
        }
        BinaryBase::Forest { params } => Ok(BinaryModel::Forest {
            forest: fit_random_forest(x, &yf, params, seed)?,
        }),
    }
}

/// Mean log-loss plus `(l2/2)||w||^2`, its gradient packed as `[w.., b]`.
fn logistic_loss(x: &Matrix, y: &[f64], theta: &[f64], l2: f64, grad: Option<&mut [f64]>) -> f64 {
    let d = x.cols();
    let n = x.rows() as f64;
    let (w, b) = theta.split_at(d);
    let mut loss = 0.0;
    let mut g = grad;
    if let Some(g) = g.as_deref_mut() {
        g.fill(0.0);
    }
    for (row, &t) in x.iter_rows().zip(y) {
        let z = dot(w, row) + b[0];
        // log(1 + e^z) - t z
        loss += softplus(z) - t * z;
        if let Some(g) = g.as_deref_mut() {
            let r = sigmoid(z) - t;
            for j in 0..d {
                g[j] += r * row[j];
            }
            g[d] += r;
        }
    }
    loss /= n;
    loss += 0.5 * l2 * dot(w, w);
    if let Some(g) = g {
        for j in 0..d {
            g[j] = g[j] / n + l2 * w[j];
        }
        g[d] /= n;
    }
    loss
}

/// Gradient descent with Armijo backtracking.
fn logistic(x: &Matrix, y: &[f64], l2: f64) -> (Vec<f64>, f64) {
    let d = x.cols();
    let mut theta = vec![0.0; d + 1];
    let mut grad = vec![0.0; d + 1];
    let mut trial = vec![0.0; d + 1];
    let mut step = 1.0;
    let mut loss = logistic_loss(x, y, &theta, l2, Some(&mut grad));
    for _ in 0..LOGISTIC_MAX_ITER {
        let gn2 = dot(&grad, &grad);
        if gn2.sqrt() < LOGISTIC_GRAD_TOL {
            break;
        }
        step *= 2.0;
        loop {
            for j in 0..=d {
                trial[j] = theta[j] - step * grad[j];
            }
            let l = logistic_loss(x, y, &trial, l2, None);
            if l <= loss - 0.5 * step * gn2 || step < 1e-12 {
                break;
            }
            step *= 0.5;
        }
        if step < 1e-12 {
            break;
        }
        std::mem::swap(&mut theta, &mut trial);
        loss = logistic_loss(x, y, &theta, l2, Some(&mut grad));
    }
    let bias = theta.pop().expect("bias slot");
    (theta, bias)
}
