//! Grid search with seeded k-fold cross-validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::runner::{fit_normalized, to_labels};
use super::split::kfold_indices;
use crate::error::{Error, Result};
use crate::labels::LabelSpace;
use crate::matrix::Matrix;
use crate::metrics::macro_mae;
use crate::models::ModelSpec;
use crate::rng::derive_seed;
use crate::rounding::RoundingStrategy;

pub const DEFAULT_CV_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: usize,
    pub best_spec: ModelSpec,
    /// Mean fold macro-MAE per grid point; `None` when any fold failed.
    pub scores: Vec<Option<f64>>,
}

/// Scores every grid point on the same folds and keeps the lowest mean
/// fold macro-MAE. Ties go to the earliest point.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    grid: &[ModelSpec],
    x: &Matrix,
    feature_names: &[String],
    y: &[i32],
    space: &LabelSpace,
    k: usize,
    rounding: &RoundingStrategy,
    seed: u64,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let folds = kfold_indices(x.rows(), k, seed)?;
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..k).map(move |f| (g, f)))
        .collect();
    let fold_scores: Vec<Option<f64>> = tasks
        .par_iter()
        .map(|&(g, f)| {
            let val = &folds[f];
            let train: Vec<usize> = (0..k).filter(|&j| j != f).flat_map(|j| folds[j].iter().copied()).collect();
            score_fold(&grid[g], x, feature_names, y, space, &train, val, rounding, derive_seed(seed, f as u64 + 1))
                .map_err(|e| log::debug!("cv point {g} fold {f} failed: {e}"))
                .ok()
        })
        .collect();
    let scores: Vec<Option<f64>> = fold_scores
        .chunks(k)
        .map(|c| {
            let all: Option<Vec<f64>> = c.iter().copied().collect();
            all.map(|v| v.iter().sum::<f64>() / k as f64).filter(|s| s.is_finite())
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
    }
    let (best, _) = best.ok_or_else(|| Error::Model("every grid point failed during cross-validation".into()))?;
    Ok(CvResult {
        best,
        best_spec: grid[best].clone(),
        scores,
    })
}

#[allow(clippy::too_many_arguments)]
fn score_fold(
    spec: &ModelSpec,
    x: &Matrix,
    names: &[String],
    y: &[i32],
    space: &LabelSpace,
    train: &[usize],
    val: &[usize],
    rounding: &RoundingStrategy,
    seed: u64,
) -> Result<f64> {
    let xt = x.select_rows(train);
    let yt: Vec<i32> = train.iter().map(|&i| y[i]).collect();
    let (norm, model) = fit_normalized(spec, &xt, names, &yt, space, seed)?;
    let xv = norm.transform(&x.select_rows(val))?;
    let yv: Vec<i32> = val.iter().map(|&i| y[i]).collect();
    let pred = match model.predict(&xv)? {
        crate::models::Prediction::Labels(l) => l,
        crate::models::Prediction::Raw(raw_val) => {
            let raw_train = match model.predict(&norm.transform(&xt)?)? {
                crate::models::Prediction::Raw(r) => r,
                crate::models::Prediction::Labels(_) => unreachable!("model changed output kind"),
            };
            let map = rounding.fit(&raw_train, &yt, space, derive_seed(seed, 1000))?;
            to_labels(&raw_val, &map, space)?
        }
    };
    macro_mae(&yv, &pred)
}
