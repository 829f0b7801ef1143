//! Ordinal random forest: K-1 regression forests on cumulative indicators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelSpace;
use crate::learners::forest::{fit_random_forest, ForestParams, RandomForest};
use crate::matrix::Matrix;
use crate::ordinal::argmax_labels;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrfModel {
    /// Forest k estimates `P(y <= V_k)`.
    pub forests: Vec<RandomForest>,
    pub space: LabelSpace,
    pub n_features: usize,
}

pub fn orf_fit(
    x: &Matrix,
    y: &[i32],
    space: &LabelSpace,
    params: ForestParams,
    seed: u64,
) -> Result<OrfModel> {
    let ranks = space.ranks(y)?;
    let forests = (0..space.len() - 1)
        .into_par_iter()
        .map(|k| {
            let t: Vec<f64> = ranks.iter().map(|&r| if r <= k { 1.0 } else { 0.0 }).collect();
            fit_random_forest(x, &t, params, derive_seed(seed, k as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrfModel {
        forests,
        space: space.clone(),
        n_features: x.cols(),
    })
}

/// Differences of cumulative estimates, clipped at zero and renormalized.
/// The flag is set when everything clipped to zero and the uniform vector
/// was returned instead.
pub fn orf_probs_from_cumulative(cum: &[f64]) -> (Vec<f64>, bool) {
    let k = cum.len() + 1;
    let mut p = Vec::with_capacity(k);
    let mut prev = 0.0;
    for &c in cum {
        p.push((c - prev).max(0.0));
        prev = c;
    }
    p.push((1.0 - prev).max(0.0));
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return (vec![1.0 / k as f64; k], true);
    }
    p.iter_mut().for_each(|v| *v /= total);
    (p, false)
}

impl OrfModel {
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        if x.cols() != self.n_features {
            return Err(Error::invalid(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.cols()
            )));
        }
        Ok(x
            .iter_rows()
            .enumerate()
            .map(|(i, r)| {
                let cum: Vec<f64> = self.forests.iter().map(|f| f.predict_row(r)).collect();
                let (p, fallback) = orf_probs_from_cumulative(&cum);
                if fallback {
                    log::warn!("row {i}: all ORF probabilities clipped to zero, using uniform");
                }
                p
            })
            .collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<i32>> {
        Ok(argmax_labels(&self.space, &self.predict_proba(x)?))
    }
}
