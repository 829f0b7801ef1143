//! Immediate- and all-threshold hinge models on a shared linear score.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelSpace;
use crate::learners::binary::{sigmoid, softplus};
use crate::learners::linear::check_xy;
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdVariant {
    Immediate,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdParams {
    pub variant: ThresholdVariant,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default)]
    pub l2: f64,
}

fn default_epochs() -> usize {
    100
}

fn default_lr() -> f64 {
    0.01
}

impl ThresholdParams {
    pub fn new(variant: ThresholdVariant) -> Self {
        Self {
            variant,
            epochs: default_epochs(),
            lr: default_lr(),
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdLossModel {
    pub weights: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub variant: ThresholdVariant,
    pub space: LabelSpace,
}

fn hinge(u: f64) -> f64 {
    (1.0 - u).max(0.0)
}

/// Per-sample loss for score `z` and class rank `rank` (0-based).
/// Infinite exterior thresholds contribute nothing.
pub fn threshold_loss(variant: ThresholdVariant, z: f64, rank: usize, thresholds: &[f64]) -> f64 {
    let mut total = 0.0;
    for (l, &t) in thresholds.iter().enumerate() {
        let active = match variant {
            ThresholdVariant::All => true,
            ThresholdVariant::Immediate => l + 1 == rank || l == rank,
        };
        if active {
            total += if l < rank { hinge(z - t) } else { hinge(t - z) };
        }
    }
    total
}

fn thresholds_from(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    let mut acc = a[0];
    out.push(acc);
    for &g in &a[1..] {
        acc += softplus(g);
        out.push(acc);
    }
    out
}

impl ThresholdLossModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row)
    }

    /// Class rank `i` with `theta_{i-1} < z <= theta_i`.
    pub fn rank_of(&self, z: f64) -> usize {
        self.thresholds.iter().filter(|&&t| t < z).count()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<i32>> {
        if x.cols() != self.weights.len() {
            return Err(Error::invalid(format!(
                "model expects {} features, got {}",
                self.weights.len(),
                x.cols()
            )));
        }
        Ok(x
            .iter_rows()
            .map(|r| self.space.label(self.rank_of(self.score_row(r))))
            .collect())
    }

    pub fn mean_loss(&self, x: &Matrix, y: &[i32]) -> Result<f64> {
        let ranks = self.space.ranks(y)?;
        let total: f64 = x
            .iter_rows()
            .zip(&ranks)
            .map(|(r, &k)| threshold_loss(self.variant, self.score_row(r), k, &self.thresholds))
            .sum();
        Ok(total / x.rows() as f64)
    }
}

pub fn threshold_fit(
    x: &Matrix,
    y: &[i32],
    space: &LabelSpace,
    params: ThresholdParams,
    seed: u64,
) -> Result<ThresholdLossModel> {
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    check_xy(x, &yf)?;
    if !(params.lr > 0.0) || params.epochs == 0 {
        return Err(Error::invalid("threshold model needs lr > 0 and epochs > 0"));
    }
    let ranks = space.ranks(y)?;
    let d = x.cols();
    let m = space.len() - 1;
    let mut w = vec![0.0; d];
    // unit-spaced thresholds centred on zero
    let mut a = vec![1.0_f64.exp_m1().ln(); m];
    a[0] = 1.0 - space.len() as f64 / 2.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut g_theta = vec![0.0; m];
    // epoch-end iterates of the second half are averaged
    let burn_in = params.epochs / 2;
    let mut avg_w = vec![0.0; d];
    let mut avg_theta = vec![0.0; m];
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let row = x.row(i);
            let rank = ranks[i];
            let theta = thresholds_from(&a);
            let z = dot(&w, row);
            let mut gz = 0.0;
            g_theta.fill(0.0);
            for (l, &t) in theta.iter().enumerate() {
                let active = match params.variant {
                    ThresholdVariant::All => true,
                    ThresholdVariant::Immediate => l + 1 == rank || l == rank,
                };
                if !active {
                    continue;
                }
                if l < rank {
                    if z - t < 1.0 {
                        gz -= 1.0;
                        g_theta[l] += 1.0;
                    }
                } else if t - z < 1.0 {
                    gz += 1.0;
                    g_theta[l] -= 1.0;
                }
            }
            for j in 0..d {
                w[j] -= params.lr * (gz * row[j] + params.l2 * w[j]);
            }
            let mut tail = 0.0;
            for l in (0..m).rev() {
                tail += g_theta[l];
                let chain = if l == 0 { 1.0 } else { sigmoid(a[l]) };
                a[l] -= params.lr * tail * chain;
            }
        }
        if w.iter().chain(&a).any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                lr: params.lr,
                reason: "non-finite threshold model parameters".into(),
            });
        }
        if epoch >= burn_in {
            let t = (epoch - burn_in + 1) as f64;
            for (s, v) in avg_w.iter_mut().zip(&w) {
                *s += (v - *s) / t;
            }
            for (s, v) in avg_theta.iter_mut().zip(thresholds_from(&a)) {
                *s += (v - *s) / t;
            }
        }
    }
    Ok(ThresholdLossModel {
        weights: avg_w,
        thresholds: avg_theta,
        variant: params.variant,
        space: space.clone(),
    })
}
