//! Dedicated ordinal regressors.

pub mod logit;
pub mod orf;
pub mod saoc;
pub mod threshold;

pub use logit::{ord_fit, OrdParams, OrderedLogitModel};
pub use orf::{orf_fit, orf_probs_from_cumulative, OrfModel};
pub use saoc::{saoc_fit, saoc_scores, SaocModel};
pub use threshold::{threshold_fit, threshold_loss, ThresholdLossModel, ThresholdParams, ThresholdVariant};

use crate::labels::{argmax_lowest, LabelSpace};

pub(crate) fn argmax_labels(space: &LabelSpace, scores: &[Vec<f64>]) -> Vec<i32> {
    scores.iter().map(|s| space.label(argmax_lowest(s))).collect()
}
