//! Cumulative-logit (proportional odds) model: `logit P(Y <= V_i) = b_i + w.x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelSpace;
use crate::learners::binary::{sigmoid, softplus};
use crate::learners::linear::check_xy;
use crate::matrix::{dot, Matrix};
use crate::ordinal::argmax_labels;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrdParams {
    #[serde(default)]
    pub l2: f64,
    #[serde(default = "default_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_iter() -> usize {
    5000
}

fn default_tol() -> f64 {
    1e-9
}

impl Default for OrdParams {
    fn default() -> Self {
        Self {
            l2: 0.0,
            max_iter: default_iter(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedLogitModel {
    pub weights: Vec<f64>,
    /// Strictly increasing cutpoints `b_1 < ... < b_{K-1}`.
    pub intercepts: Vec<f64>,
    pub space: LabelSpace,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl OrderedLogitModel {
    pub fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        let s = dot(&self.weights, row);
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(self.space.len());
        for &b in &self.intercepts {
            let c = sigmoid(b + s);
            out.push(c - prev);
            prev = c;
        }
        out.push(1.0 - prev);
        out
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        if x.cols() != self.weights.len() {
            return Err(Error::invalid(format!(
                "model expects {} features, got {}",
                self.weights.len(),
                x.cols()
            )));
        }
        Ok(x.iter_rows().map(|r| self.proba_row(r)).collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<i32>> {
        Ok(argmax_labels(&self.space, &self.predict_proba(x)?))
    }
}

fn intercepts(a: &[f64]) -> Vec<f64> {
    let mut b = Vec::with_capacity(a.len());
    let mut acc = a[0];
    b.push(acc);
    for &g in &a[1..] {
        acc += softplus(g);
        b.push(acc);
    }
    b
}

fn inv_softplus(v: f64) -> f64 {
    // log(e^v - 1)
    if v > 30.0 {
        v
    } else {
        v.exp_m1().ln()
    }
}

/// Mean log-likelihood minus the L2 term, with gradient over `[w.., a..]`.
fn objective(
    x: &Matrix,
    ranks: &[usize],
    theta: &[f64],
    l2: f64,
    grad: Option<&mut [f64]>,
) -> f64 {
    let d = x.cols();
    let (w, a) = theta.split_at(d);
    let m = a.len();
    let b = intercepts(a);
    let n = x.rows() as f64;
    let mut ll = 0.0;
    let mut gb = vec![0.0; m];
    let mut g = grad;
    if let Some(g) = g.as_deref_mut() {
        g.fill(0.0);
    }
    for (row, &k) in x.iter_rows().zip(ranks) {
        let s = dot(w, row);
        let (hi, dhi) = if k < m {
            let c = sigmoid(b[k] + s);
            (c, c * (1.0 - c))
        } else {
            (1.0, 0.0)
        };
        let (lo, dlo) = if k > 0 {
            let c = sigmoid(b[k - 1] + s);
            (c, c * (1.0 - c))
        } else {
            (0.0, 0.0)
        };
        let p = (hi - lo).max(1e-300);
        ll += p.ln();
        if let Some(g) = g.as_deref_mut() {
            let ds = (dhi - dlo) / p;
            for j in 0..d {
                g[j] += ds * row[j];
            }
            if k < m {
                gb[k] += dhi / p;
            }
            if k > 0 {
                gb[k - 1] -= dlo / p;
            }
        }
    }
    ll /= n;
    ll -= 0.5 * l2 * dot(w, w);
    if let Some(g) = g {
        for j in 0..d {
            g[j] = g[j] / n - l2 * w[j];
        }
        // b_i = a_1 + sum_{j<=i, j>=2} softplus(a_j)
        let mut tail = 0.0;
        for i in (0..m).rev() {
            tail += gb[i] / n;
            g[d + i] = if i == 0 { tail } else { tail * sigmoid(a[i]) };
        }
    }
    ll
}

pub fn ord_fit(x: &Matrix, y: &[i32], space: &LabelSpace, params: OrdParams) -> Result<OrderedLogitModel> {
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    check_xy(x, &yf)?;
    if !(params.l2 >= 0.0) {
        return Err(Error::invalid("l2 must be >= 0"));
    }
    let ranks = space.ranks(y)?;
    let d = x.cols();
    let k = space.len();
    // start from smoothed marginal cumulative logits with w = 0
    let mut counts = vec![0.5; k];
    for &r in &ranks {
        counts[r] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    let mut cum = 0.0;
    let mut b0 = Vec::with_capacity(k - 1);
    for c in &counts[..k - 1] {
        cum += c;
        let p = cum / total;
        b0.push((p / (1.0 - p)).ln());
    }
    let mut theta = vec![0.0; d + k - 1];
    theta[d] = b0[0];
    for i in 1..k - 1 {
        theta[d + i] = inv_softplus((b0[i] - b0[i - 1]).max(1e-6));
    }

    let mut grad = vec![0.0; theta.len()];
    let mut trial = vec![0.0; theta.len()];
    let mut ll = objective(x, &ranks, &theta, params.l2, Some(&mut grad));
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let mut accepted = None;
        while step > 1e-14 {
            for i in 0..theta.len() {
                trial[i] = theta[i] + step * grad[i];
            }
            let t = objective(x, &ranks, &trial, params.l2, None);
            if t >= ll {
                accepted = Some(t);
                break;
            }
            step *= 0.5;
        }
        let Some(new_ll) = accepted else { break };
        std::mem::swap(&mut theta, &mut trial);
        let change = (new_ll - ll).abs() / ll.abs().max(1e-12);
        ll = objective(x, &ranks, &theta, params.l2, Some(&mut grad));
        step *= 1.5;
        if change < params.tol {
            break;
        }
    }
    if !ll.is_finite() || theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model(format!(
            "ordered logit diverged after {iterations} iterations"
        )));
    }
    let (w, a) = theta.split_at(d);
    Ok(OrderedLogitModel {
        weights: w.to_vec(),
        intercepts: intercepts(a),
        space: space.clone(),
        iterations,
        log_likelihood: ll,
    })
}
