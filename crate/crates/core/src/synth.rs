//! Seeded latent-linear ordinal data with known Bayes risk.
//!
//! `z = w.x + e`, `x ~ N(0, I)`, `e ~ N(0, sigma^2)`; the label is `1 + #{c_i < z}`.

use chrono::{Days, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::labels::LabelSpace;
use crate::matrix::{dot, Matrix};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub n: usize,
    #[serde(default = "d_d")]
    pub d: usize,
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    /// Gap between consecutive latent cutpoints.
    #[serde(default = "d_spacing")]
    pub spacing: f64,
    /// Number of publication dates; the first holds `first_share` of the rows.
    #[serde(default = "d_dates")]
    pub n_dates: usize,
    #[serde(default = "d_first")]
    pub first_share: f64,
    pub seed: u64,
}

fn d_d() -> usize {
    5
}
fn d_k() -> usize {
    6
}
fn d_sigma() -> f64 {
    0.5
}
fn d_spacing() -> f64 {
    2.0
}
fn d_dates() -> usize {
    12
}
fn d_first() -> f64 {
    0.3
}

impl SynthParams {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            d: d_d(),
            k: d_k(),
            sigma: d_sigma(),
            spacing: d_spacing(),
            n_dates: d_dates(),
            first_share: d_first(),
            seed,
        }
    }
}

/// The generating process: weights, cutpoints and noise scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentModel {
    pub weights: Vec<f64>,
    pub cutpoints: Vec<f64>,
    pub sigma: f64,
}

fn std_normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

impl LatentModel {
    /// Decaying alternating weights `1, -0.8, 0.6, ...` and centred cutpoints.
    pub fn new(d: usize, k: usize, sigma: f64, spacing: f64) -> Result<Self> {
        if d == 0 || k < 2 || !(sigma > 0.0) || !(spacing > 0.0) {
            return Err(Error::invalid("synthetic model needs d >= 1, k >= 2, sigma > 0, spacing > 0"));
        }
        let weights = (0..d)
            .map(|j| {
                let mag = (1.0 - 0.2 * j as f64).max(0.2);
                if j % 2 == 0 {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let mid = (k as f64 - 2.0) / 2.0;
        let cutpoints = (0..k - 1).map(|i| (i as f64 - mid) * spacing).collect();
        Ok(Self {
            weights,
            cutpoints,
            sigma,
        })
    }

    pub fn space(&self) -> LabelSpace {
        LabelSpace::range(1, self.cutpoints.len() as i32 + 1).expect("k >= 2")
    }

    pub fn label_of(&self, z: f64) -> i32 {
        1 + self.cutpoints.iter().filter(|&&c| c < z).count() as i32
    }

    /// Exact `P(y = j | x)` for `j = 1..=K`.
    pub fn class_probs(&self, row: &[f64]) -> Vec<f64> {
        let m = dot(&self.weights, row);
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(self.cutpoints.len() + 1);
        for &c in &self.cutpoints {
            let f = std_normal_cdf((c - m) / self.sigma);
            out.push(f - prev);
            prev = f;
        }
        out.push(1.0 - prev);
        out
    }

    /// Conditional median label, the absolute-error Bayes decision.
    pub fn bayes_predict(&self, row: &[f64]) -> i32 {
        let p = self.class_probs(row);
        let mut acc = 0.0;
        for (j, v) in p.iter().enumerate() {
            acc += v;
            if acc >= 0.5 {
                return j as i32 + 1;
            }
        }
        p.len() as i32
    }

    /// Expected absolute error of the Bayes decision, averaged over rows.
    pub fn bayes_mae(&self, x: &Matrix) -> f64 {
        let total: f64 = x
            .iter_rows()
            .map(|r| {
                let med = self.bayes_predict(r);
                self.class_probs(r)
                    .iter()
                    .enumerate()
                    .map(|(j, p)| p * (j as i32 + 1 - med).abs() as f64)
                    .sum::<f64>()
            })
            .sum();
        total / x.rows() as f64
    }
}

pub struct SynthData {
    pub dataset: Dataset,
    pub model: LatentModel,
}

pub fn generate(params: &SynthParams) -> Result<SynthData> {
    if params.n == 0 || params.n_dates == 0 || !(0.0..=1.0).contains(&params.first_share) {
        return Err(Error::invalid("synthetic data needs n >= 1, n_dates >= 1, first_share in [0, 1]"));
    }
    let model = LatentModel::new(params.d, params.k, params.sigma, params.spacing)?;
    let mut r = rng::stream(params.seed, 0);
    let noise = Normal::new(0.0, params.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let start = NaiveDate::from_ymd_opt(2019, 8, 1).expect("valid date");
    let names: Vec<String> = (1..=params.d).map(|j| format!("x{j}")).collect();
    let rows = (0..params.n)
        .map(|i| {
            let features: Vec<f64> = (0..params.d).map(|_| StandardNormal.sample(&mut r)).collect();
            let z = dot(&model.weights, &features) + noise.sample(&mut r);
            let group = if params.n_dates == 1 || r.random::<f64>() < params.first_share {
                0
            } else {
                r.random_range(1..params.n_dates)
            };
            Sample {
                id: format!("syn-{i:05}"),
                name: format!("synthetic {i}"),
                date: start + Days::new(30 * group as u64),
                source: "synthetic".into(),
                features,
                level: model.label_of(z),
            }
        })
        .collect();
    Ok(SynthData {
        dataset: Dataset::new(names, rows)?,
        model,
    })
}
