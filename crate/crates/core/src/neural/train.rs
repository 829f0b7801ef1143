use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelSpace;
use crate::learners::linear::check_xy;
use crate::matrix::Matrix;
use crate::neural::network::Network;
use crate::neural::{encode_ranks, EncodedTargets, HeadKind, OrcnnNorm};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralParams {
    pub head: HeadKind,
    #[serde(default = "d_hidden")]
    pub hidden: usize,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_batch")]
    pub batch: usize,
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub orcnn_norm: OrcnnNorm,
}

fn d_hidden() -> usize {
    64
}
fn d_epochs() -> usize {
    200
}
fn d_lr() -> f64 {
    0.01
}
fn d_batch() -> usize {
    32
}
fn d_momentum() -> f64 {
    0.9
}

impl NeuralParams {
    pub fn new(head: HeadKind) -> Self {
        Self {
            head,
            hidden: d_hidden(),
            epochs: d_epochs(),
            lr: d_lr(),
            batch: d_batch(),
            momentum: d_momentum(),
            orcnn_norm: OrcnnNorm::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub network: Network,
    pub space: LabelSpace,
}

impl NeuralModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<i32>> {
        self.network.check_input(x)?;
        Ok(x
            .iter_rows()
            .map(|r| self.space.label(self.network.predict_rank(r)))
            .collect())
    }

    /// Raw head probabilities per row (conditionals for CORN and CONDOR).
    pub fn predict_outputs(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        self.network.check_input(x)?;
        Ok(x.iter_rows().map(|r| self.network.probabilities(r)).collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    /// Mean minibatch loss per epoch.
    pub epoch_loss: Vec<f64>,
}

pub fn train(
    x: &Matrix,
    y: &[i32],
    space: &LabelSpace,
    params: NeuralParams,
    seed: u64,
) -> Result<(NeuralModel, TrainTrace)> {
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    check_xy(x, &yf)?;
    if params.epochs == 0 || params.batch == 0 || params.hidden == 0 || !(params.lr > 0.0) {
        return Err(Error::invalid(
            "neural training needs positive epochs, batch, hidden width and lr",
        ));
    }
    if !(0.0..1.0).contains(&params.momentum) {
        return Err(Error::invalid("momentum must lie in [0, 1)"));
    }
    let ranks = space.ranks(y)?;
    let targets = encode_ranks(&ranks, space.len(), params.head, params.orcnn_norm);
    let mut net = Network::new(params.head, x.cols(), params.hidden, space.len(), &mut rng::stream(seed, 0));
    let mut shuffle = rng::stream(seed, 1);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut grad = vec![0.0; net.params.len()];
    let mut velocity = vec![0.0; net.params.len()];
    let mut trace = TrainTrace::default();
    for epoch in 0..params.epochs {
        order.shuffle(&mut shuffle);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(params.batch) {
            let loss = net.loss_grad(&net.params, x, &targets, chunk, Some(&mut grad));
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    lr: params.lr,
                    reason: format!("non-finite {} loss", params.head.name()),
                });
            }
            for ((p, v), g) in net.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = params.momentum * *v - params.lr * g;
                *p += *v;
            }
            sum += loss;
            batches += 1;
        }
        trace.epoch_loss.push(sum / batches as f64);
    }
    if net.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Diverged {
            epoch: params.epochs,
            lr: params.lr,
            reason: "non-finite parameters".into(),
        });
    }
    Ok((
        NeuralModel {
            network: net,
            space: space.clone(),
        },
        trace,
    ))
}

/// Norm-wise relative error between the analytic gradient and central
/// differences of the loss over all rows.
pub fn gradient_check(net: &Network, x: &Matrix, targets: &EncodedTargets, h: f64) -> f64 {
    let idx: Vec<usize> = (0..x.rows()).collect();
    let mut analytic = vec![0.0; net.params.len()];
    net.loss_grad(&net.params, x, targets, &idx, Some(&mut analytic));
    let mut p = net.params.clone();
    let mut diff2 = 0.0;
    let mut norm2 = 0.0;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = net.loss_grad(&p, x, targets, &idx, None);
        p[i] = orig - h;
        let down = net.loss_grad(&p, x, targets, &idx, None);
        p[i] = orig;
        let fd = (up - down) / (2.0 * h);
        diff2 += (fd - analytic[i]).powi(2);
        norm2 += fd.powi(2).max(analytic[i].powi(2));
    }
    diff2.sqrt() / norm2.sqrt().max(1e-12)
}

/// Random small network plus targets for gradient checks.
pub fn gradient_check_fixture(kind: HeadKind, seed: u64) -> (Network, Matrix, EncodedTargets) {
    use rand::Rng;
    let mut r = rng::stream(seed, 7);
    let (n, d, h, k) = (6, 3, 5, 4);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let ranks: Vec<usize> = (0..n).map(|i| i % k).collect();
    let net = Network::new(kind, d, h, k, &mut r);
    let targets = encode_ranks(&ranks, k, kind, OrcnnNorm::default());
    (net, Matrix::from_rows(&rows).unwrap(), targets)
}
