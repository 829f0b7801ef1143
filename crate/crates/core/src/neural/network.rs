use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::binary::{sigmoid, softplus};
use crate::matrix::Matrix;
use crate::neural::{EncodedTargets, HeadKind, PROB_CLIP};

/// Flat parameter layout: `W1 (h x d)`, `b1 (h)`, head weights, head vector.
/// Dense heads store an `m x h` weight block; CORAL and Spacecutter store a
/// single shared row of length `h`. The trailing `m` values are output
/// biases, CORAL biases, or Spacecutter cutpoint parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub kind: HeadKind,
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub params: Vec<f64>,
}

pub(crate) struct Scratch {
    pre: Vec<f64>,
    act: Vec<f64>,
    pub(crate) logits: Vec<f64>,
    dlogits: Vec<f64>,
    dact: Vec<f64>,
}

impl Network {
    pub fn new<R: Rng>(kind: HeadKind, input_dim: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        let mut net = Network {
            kind,
            input_dim,
            hidden,
            classes,
            params: Vec::new(),
        };
        let total = net.head_vec_offset() + net.outputs();
        net.params = vec![0.0; total];
        let b1 = (6.0 / input_dim.max(1) as f64).sqrt();
        for v in &mut net.params[..hidden * input_dim] {
            *v = rng.random_range(-b1..b1);
        }
        let (w_off, rows) = (net.head_w_offset(), net.head_rows());
        let b2 = (6.0 / (hidden + rows) as f64).sqrt();
        for v in &mut net.params[w_off..w_off + rows * hidden] {
            *v = rng.random_range(-b2..b2);
        }
        if kind == HeadKind::Spacecutter {
            let off = net.head_vec_offset();
            let m = net.outputs();
            net.params[off] = 1.0 - classes as f64 / 2.0;
            for v in &mut net.params[off + 1..off + m] {
                *v = 1.0_f64.exp_m1().ln();
            }
        }
        net
    }

    pub fn outputs(&self) -> usize {
        self.kind.outputs(self.classes)
    }

    fn head_rows(&self) -> usize {
        match self.kind {
            HeadKind::Coral | HeadKind::Spacecutter => 1,
            _ => self.outputs(),
        }
    }

    fn head_w_offset(&self) -> usize {
        self.hidden * self.input_dim + self.hidden
    }

    fn head_vec_offset(&self) -> usize {
        self.head_w_offset() + self.head_rows() * self.hidden
    }

    /// CORAL biases or sorted Spacecutter cutpoints; dense output biases otherwise.
    pub fn head_vector(&self) -> Vec<f64> {
        let off = self.head_vec_offset();
        let raw = &self.params[off..off + self.outputs()];
        if self.kind == HeadKind::Spacecutter {
            cutpoints(raw)
        } else {
            raw.to_vec()
        }
    }

    pub(crate) fn scratch(&self) -> Scratch {
        Scratch {
            pre: vec![0.0; self.hidden],
            act: vec![0.0; self.hidden],
            logits: vec![0.0; self.outputs()],
            dlogits: vec![0.0; self.outputs()],
            dact: vec![0.0; self.hidden],
        }
    }

    pub(crate) fn forward_into(&self, params: &[f64], x: &[f64], s: &mut Scratch) {
        let (d, h, m) = (self.input_dim, self.hidden, self.outputs());
        let b1 = &params[h * d..h * d + h];
        for j in 0..h {
            let w = &params[j * d..(j + 1) * d];
            let z = b1[j] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            s.pre[j] = z;
            s.act[j] = z.max(0.0);
        }
        let w_off = self.head_w_offset();
        let v_off = self.head_vec_offset();
        let hv = &params[v_off..v_off + m];
        match self.kind {
            HeadKind::Coral | HeadKind::Spacecutter => {
                let w = &params[w_off..w_off + h];
                let g: f64 = w.iter().zip(&s.act).map(|(a, b)| a * b).sum();
                if self.kind == HeadKind::Coral {
                    for k in 0..m {
                        s.logits[k] = g + hv[k];
                    }
                } else {
                    let mut c = hv[0];
                    for k in 0..m {
                        if k > 0 {
                            c += softplus(hv[k]);
                        }
                        s.logits[k] = c - g;
                    }
                }
            }
            _ => {
                for k in 0..m {
                    let w = &params[w_off + k * h..w_off + (k + 1) * h];
                    s.logits[k] = hv[k] + w.iter().zip(&s.act).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }

    /// Accumulates `scale * dL/dparams` given `s.dlogits` set by the loss.
    fn backward(&self, params: &[f64], x: &[f64], s: &mut Scratch, grad: &mut [f64]) {
        let (d, h, m) = (self.input_dim, self.hidden, self.outputs());
        let w_off = self.head_w_offset();
        let v_off = self.head_vec_offset();
        s.dact.fill(0.0);
        match self.kind {
            HeadKind::Coral | HeadKind::Spacecutter => {
                let sum: f64 = s.dlogits.iter().sum();
                let dg = if self.kind == HeadKind::Coral { sum } else { -sum };
                for j in 0..h {
                    grad[w_off + j] += dg * s.act[j];
                    s.dact[j] = dg * params[w_off + j];
                }
                if self.kind == HeadKind::Coral {
                    for k in 0..m {
                        grad[v_off + k] += s.dlogits[k];
                    }
                } else {
                    // c_k = a_0 + sum_{1<=j<=k} softplus(a_j)
                    let mut tail = 0.0;
                    for k in (0..m).rev() {
                        tail += s.dlogits[k];
                        let chain = if k == 0 { 1.0 } else { sigmoid(params[v_off + k]) };
                        grad[v_off + k] += tail * chain;
                    }
                }
            }
            _ => {
                for k in 0..m {
                    let dz = s.dlogits[k];
                    if dz == 0.0 {
                        continue;
                    }
                    grad[v_off + k] += dz;
                    let row = w_off + k * h;
                    for j in 0..h {
                        grad[row + j] += dz * s.act[j];
                        s.dact[j] += dz * params[row + j];
                    }
                }
            }
        }
        for j in 0..h {
            if s.pre[j] <= 0.0 {
                continue;
            }
            let dz = s.dact[j];
            grad[h * d + j] += dz;
            let w = &mut grad[j * d..(j + 1) * d];
            for (g, xi) in w.iter_mut().zip(x) {
                *g += dz * xi;
            }
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.scratch();
        self.forward_into(&self.params, x, &mut s);
        s.logits
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        head_probabilities(self.kind, &self.logits(x))
    }

    pub fn predict_rank(&self, x: &[f64]) -> usize {
        decode(self.kind, &self.probabilities(x))
    }

    pub fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::invalid(format!(
                "network expects {} features, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        Ok(())
    }

    /// Batch loss and its gradient at `params` over rows `idx`.
    pub(crate) fn loss_grad(
        &self,
        params: &[f64],
        x: &Matrix,
        targets: &EncodedTargets,
        idx: &[usize],
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        let mut s = self.scratch();
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let denom = match self.kind {
            HeadKind::Corn => idx
                .iter()
                .map(|&i| 1 + targets.bits[i][..self.outputs() - 1].iter().map(|&b| b as usize).sum::<usize>())
                .sum::<usize>() as f64,
            _ => idx.len() as f64,
        };
        let mut total = 0.0;
        for &i in idx {
            let row = x.row(i);
            self.forward_into(params, row, &mut s);
            total += sample_loss(self.kind, &s.logits, &targets.bits[i], targets.task_weights.as_deref(), &mut s.dlogits);
            if let Some(g) = grad.as_deref_mut() {
                s.dlogits.iter_mut().for_each(|v| *v /= denom);
                self.backward(params, row, &mut s, g);
            }
        }
        total / denom
    }
}

fn cutpoints(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut c = raw[0];
    out.push(c);
    for &a in &raw[1..] {
        c += softplus(a);
        out.push(c);
    }
    out
}

fn clipped_bce(p: f64, t: u8) -> (f64, f64) {
    // returns (loss, dloss/dlogit)
    let q = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    let t = t as f64;
    let loss = -(t * q.ln() + (1.0 - t) * (1.0 - q).ln());
    let grad = if q == p { p - t } else { 0.0 };
    (loss, grad)
}

/// Unnormalized loss of one sample; writes the logit gradient into `dz`.
fn sample_loss(kind: HeadKind, z: &[f64], t: &[u8], lambda: Option<&[f64]>, dz: &mut [f64]) -> f64 {
    let m = z.len();
    let mut loss = 0.0;
    match kind {
        HeadKind::Nnrank | HeadKind::Orcnn | HeadKind::Coral | HeadKind::Condor => {
            for k in 0..m {
                let weight = match kind {
                    HeadKind::Nnrank => 1.0 / m as f64,
                    HeadKind::Orcnn => lambda.map_or(1.0, |l| l[k]),
                    HeadKind::Condor if k > 0 => t[k - 1] as f64,
                    _ => 1.0,
                };
                if weight == 0.0 {
                    dz[k] = 0.0;
                    continue;
                }
                let (l, g) = clipped_bce(sigmoid(z[k]), t[k]);
                loss += weight * l;
                dz[k] = weight * g;
            }
        }
        HeadKind::Corn => {
            for k in 0..m {
                if k > 0 && t[k - 1] == 0 {
                    dz[k] = 0.0;
                    continue;
                }
                let tk = t[k] as f64;
                // -[t log s(z) + (1 - t)(log s(z) - z)]
                loss += softplus(-z[k]) + (1.0 - tk) * z[k];
                dz[k] = sigmoid(z[k]) - tk;
            }
        }
        HeadKind::Spacecutter => {
            let r = t.iter().map(|&b| b as usize).sum::<usize>();
            let f = |k: usize| sigmoid(z[k]);
            let hi = if r < m { f(r) } else { 1.0 };
            let lo = if r > 0 { f(r - 1) } else { 0.0 };
            let p = hi - lo;
            let q = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            loss = -q.ln();
            dz.fill(0.0);
            if q == p {
                if r < m {
                    dz[r] = -hi * (1.0 - hi) / p;
                }
                if r > 0 {
                    dz[r - 1] = lo * (1.0 - lo) / p;
                }
            }
        }
    }
    loss
}

/// Per-unit sigmoid probabilities; for Spacecutter, the class distribution.
pub fn head_probabilities(kind: HeadKind, logits: &[f64]) -> Vec<f64> {
    match kind {
        HeadKind::Spacecutter => {
            let mut out = Vec::with_capacity(logits.len() + 1);
            let mut prev = 0.0;
            for &z in logits {
                let c = sigmoid(z);
                out.push(c - prev);
                prev = c;
            }
            out.push(1.0 - prev);
            out
        }
        _ => logits.iter().map(|&z| sigmoid(z)).collect(),
    }
}

/// Rank index (0-based) from head probabilities.
pub fn decode(kind: HeadKind, probs: &[f64]) -> usize {
    match kind {
        HeadKind::Nnrank => {
            let count = probs.iter().take_while(|&&p| p > 0.5).count();
            count.max(1) - 1
        }
        HeadKind::Orcnn | HeadKind::Coral => probs.iter().filter(|&&p| p > 0.5).count(),
        HeadKind::Corn | HeadKind::Condor => {
            let mut acc = 1.0;
            probs
                .iter()
                .filter(|&&p| {
                    acc *= p;
                    acc > 0.5
                })
                .count()
        }
        HeadKind::Spacecutter => crate::labels::argmax_lowest(probs),
    }
}
