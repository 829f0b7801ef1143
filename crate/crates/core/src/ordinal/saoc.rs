//! Simple approach to ordinal classification: K-1 binary "exceeds" models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelSpace;
use crate::learners::binary::{fit_binary_prob, BinaryBase, BinaryModel};
use crate::matrix::Matrix;
use crate::ordinal::argmax_labels;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaocModel {
    /// Member i estimates `P(y > V_i)`.
    pub members: Vec<BinaryModel>,
    pub space: LabelSpace,
}

pub fn saoc_fit(
    x: &Matrix,
    y: &[i32],
    space: &LabelSpace,
    base: BinaryBase,
    seed: u64,
) -> Result<SaocModel> {
    let ranks = space.ranks(y)?;
    let members = (0..space.len() - 1)
        .into_par_iter()
        .map(|i| {
            let b: Vec<u8> = ranks.iter().map(|&r| (r > i) as u8).collect();
            fit_binary_prob(x, &b, base, derive_seed(seed, i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SaocModel {
        members,
        space: space.clone(),
    })
}

/// Class scores from boundary exceed-probabilities. Not normalized.
pub fn saoc_scores(exceed: &[f64]) -> Vec<f64> {
    let k = exceed.len() + 1;
    (0..k)
        .map(|i| {
            if i == 0 {
                1.0 - exceed[0]
            } else if i == k - 1 {
                exceed[k - 2]
            } else {
                exceed[i - 1] * (1.0 - exceed[i])
            }
        })
        .collect()
}

impl SaocModel {
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        Ok(x
            .iter_rows()
            .map(|r| {
                let e: Vec<f64> = self.members.iter().map(|m| m.predict_row(r)).collect();
                saoc_scores(&e)
            })
            .collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<i32>> {
        Ok(argmax_labels(&self.space, &self.predict_proba(x)?))
    }

    fn check_dim(&self, x: &Matrix) -> Result<()> {
        let want = match &self.members[0] {
            BinaryModel::Logistic { weights, .. } => Some(weights.len()),
            _ => None,
        };
        match want {
            Some(d) if d != x.cols() => Err(Error::invalid(format!(
                "model expects {d} features, got {}",
                x.cols()
            ))),
            _ => Ok(()),
        }
    }
}
