//! Single-hidden-layer network with interchangeable ordinal output heads.

mod network;
mod train;

pub use network::{decode, head_probabilities, Network};
pub use train::{gradient_check, gradient_check_fixture, train, NeuralModel, NeuralParams, TrainTrace};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelSpace;

pub(crate) const PROB_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Nnrank,
    Orcnn,
    Coral,
    Corn,
    Condor,
    Spacecutter,
}

impl HeadKind {
    pub const ALL: [HeadKind; 6] = [
        HeadKind::Nnrank,
        HeadKind::Orcnn,
        HeadKind::Coral,
        HeadKind::Corn,
        HeadKind::Condor,
        HeadKind::Spacecutter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Nnrank => "nnrank",
            HeadKind::Orcnn => "orcnn",
            HeadKind::Coral => "coral",
            HeadKind::Corn => "corn",
            HeadKind::Condor => "condor",
            HeadKind::Spacecutter => "spacecutter",
        }
    }

    /// Width of the logit vector for `k` classes.
    pub fn outputs(self, k: usize) -> usize {
        match self {
            HeadKind::Nnrank => k,
            _ => k - 1,
        }
    }
}

/// How OR-CNN task weights are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrcnnNorm {
    /// Sum of square roots over all K classes.
    #[default]
    AllClasses,
    /// Renormalize the K-1 weights actually attached to tasks.
    Tasks,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTargets {
    /// Staircase bit vectors, one per sample.
    pub bits: Vec<Vec<u8>>,
    /// OR-CNN task weights, one per task.
    pub task_weights: Option<Vec<f64>>,
}

/// NNRank: ones in positions `1..=rank` of a K-vector.
/// Other heads: position k holds `1[y > V_k]`.
pub fn encode_targets(y: &[i32], space: &LabelSpace, kind: HeadKind) -> Result<EncodedTargets> {
    let ranks = space.ranks(y)?;
    Ok(encode_ranks(&ranks, space.len(), kind, OrcnnNorm::default()))
}

pub(crate) fn encode_ranks(ranks: &[usize], k: usize, kind: HeadKind, norm: OrcnnNorm) -> EncodedTargets {
    let width = kind.outputs(k);
    let bits = ranks
        .iter()
        .map(|&r| {
            (0..width)
                .map(|j| match kind {
                    HeadKind::Nnrank => (j <= r) as u8,
                    _ => (r > j) as u8,
                })
                .collect()
        })
        .collect();
    let task_weights = (kind == HeadKind::Orcnn).then(|| {
        let mut counts = vec![0usize; k];
        for &r in ranks {
            counts[r] += 1;
        }
        let mut w = orcnn_task_weights(&counts).expect("nonempty ranks");
        w.truncate(k - 1);
        if norm == OrcnnNorm::Tasks {
            let s: f64 = w.iter().sum();
            if s > 0.0 {
                w.iter_mut().for_each(|v| *v /= s);
            }
        }
        w
    });
    EncodedTargets { bits, task_weights }
}

/// `lambda_k = sqrt(N_k) / sum_m sqrt(N_m)` over all classes.
pub fn orcnn_task_weights(counts: &[usize]) -> Result<Vec<f64>> {
    let total: f64 = counts.iter().map(|&c| (c as f64).sqrt()).sum();
    if total == 0.0 {
        return Err(Error::invalid("all class counts are zero"));
    }
    Ok(counts.iter().map(|&c| (c as f64).sqrt() / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodings() {
        let s = LabelSpace::range(1, 5).unwrap();
        let e = encode_targets(&[3, 1, 5], &s, HeadKind::Nnrank).unwrap();
        assert_eq!(e.bits[0], vec![1, 1, 1, 0, 0]);
        for kind in [HeadKind::Coral, HeadKind::Corn, HeadKind::Condor, HeadKind::Orcnn] {
            let e = encode_targets(&[1, 5], &s, kind).unwrap();
            assert_eq!(e.bits[0], vec![0, 0, 0, 0]);
            assert_eq!(e.bits[1], vec![1, 1, 1, 1]);
        }
    }

    #[test]
    fn staircase_nesting() {
        let s = LabelSpace::range(0, 6).unwrap();
        for kind in HeadKind::ALL {
            let e = encode_targets(&[0, 1, 2, 3, 4, 5, 6], &s, kind).unwrap();
            for v in &e.bits {
                assert!(v.windows(2).all(|w| w[0] >= w[1]));
            }
            for pair in e.bits.windows(2) {
                assert!(pair[1].iter().zip(&pair[0]).all(|(a, b)| a >= b));
            }
        }
    }

    #[test]
    fn task_weight_arithmetic() {
        let w = orcnn_task_weights(&[1, 4, 9]).unwrap();
        for (a, b) in w.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(orcnn_task_weights(&[3, 3]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(orcnn_task_weights(&[0, 7, 0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(orcnn_task_weights(&[0, 0]).is_err());
    }
}
