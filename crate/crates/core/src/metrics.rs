//! Error metrics for ordinal predictions.
//!
//! Macro-averaged variants compute the error per true class and average the
//! classes uniformly; classes absent from `y` do not take part. Somers' D
//! counts pairs with exact integer arithmetic.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelSpace;

fn check_pair(y: &[i32], pred: &[i32]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::empty("metric on empty input"));
    }
    if y.len() != pred.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} labels vs {} predictions",
            y.len(),
            pred.len()
        )));
    }
    Ok(())
}

pub fn mae(y: &[i32], pred: &[i32]) -> Result<f64> {
    check_pair(y, pred)?;
    let total: i64 = y
        .iter()
        .zip(pred)
        .map(|(a, b)| i64::from((a - b).abs()))
        .sum();
    Ok(total as f64 / y.len() as f64)
}

pub fn rmse(y: &[i32], pred: &[i32]) -> Result<f64> {
    check_pair(y, pred)?;
    let total: i64 = y
        .iter()
        .zip(pred)
        .map(|(a, b)| i64::from(a - b).pow(2))
        .sum();
    Ok((total as f64 / y.len() as f64).sqrt())
}

/// Per true class: (count, sum |err|, sum err^2).
fn per_class(y: &[i32], pred: &[i32]) -> BTreeMap<i32, (i64, i64, i64)> {
    let mut m = BTreeMap::new();
    for (&a, &b) in y.iter().zip(pred) {
        let e = i64::from(a - b);
        let entry = m.entry(a).or_insert((0, 0, 0));
        entry.0 += 1;
        entry.1 += e.abs();
        entry.2 += e * e;
    }
    m
}

pub fn macro_mae(y: &[i32], pred: &[i32]) -> Result<f64> {
    check_pair(y, pred)?;
    let classes = per_class(y, pred);
    let sum: f64 = classes
        .values()
        .map(|&(n, abs, _)| abs as f64 / n as f64)
        .sum();
    Ok(sum / classes.len() as f64)
}

pub fn macro_rmse(y: &[i32], pred: &[i32]) -> Result<f64> {
    check_pair(y, pred)?;
    let classes = per_class(y, pred);
    let sum: f64 = classes
        .values()
        .map(|&(n, _, sq)| (sq as f64 / n as f64).sqrt())
        .sum();
    Ok(sum / classes.len() as f64)
}

/// Fraction of predictions within `k` levels of the truth.
pub fn accuracy_at_k(y: &[i32], pred: &[i32], k: u32) -> Result<f64> {
    check_pair(y, pred)?;
    let hits = y
        .iter()
        .zip(pred)
        .filter(|(a, b)| (**a - **b).unsigned_abs() <= k)
        .count();
    Ok(hits as f64 / y.len() as f64)
}

pub fn accuracy(y: &[i32], pred: &[i32]) -> Result<f64> {
    accuracy_at_k(y, pred, 0)
}

/// Concordant, discordant and tied pair counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub concordant: u64,
    pub discordant: u64,
    /// Pairs tied in either coordinate.
    pub tied: u64,
    /// Pairs tied in the label coordinate.
    pub tied_labels: u64,
}

/// Which Somers' D formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SomersVariant {
    /// `(N_C - N_D) / (N_C + N_D + N_T)` with ties in either coordinate.
    #[default]
    AllPairs,
    /// `tau_a(pred, y) / tau_a(y, y)`: pairs tied on the label are excluded.
    TauRatio,
}

/// Counts pairs in O(n^2).
pub fn pair_counts<T: PartialOrd + Copy>(predictions: &[T], labels: &[T]) -> PairCounts {
    let mut c = PairCounts::default();
    let n = predictions.len();
    for i in 0..n {
        for j in i + 1..n {
            let dx = predictions[i].partial_cmp(&predictions[j]);
            let dy = labels[i].partial_cmp(&labels[j]);
            use std::cmp::Ordering::*;
            if dy == Some(Equal) {
                c.tied_labels += 1;
            }
            match (dx, dy) {
                (Some(Equal), _) | (_, Some(Equal)) => c.tied += 1,
                (Some(a), Some(b)) if a == b => c.concordant += 1,
                (Some(_), Some(_)) => c.discordant += 1,
                _ => c.tied += 1,
            }
        }
    }
    c
}

pub fn somers_d(predictions: &[i32], labels: &[i32]) -> Result<f64> {
    somers_d_with(predictions, labels, SomersVariant::AllPairs)
}

pub fn somers_d_with(predictions: &[i32], labels: &[i32], variant: SomersVariant) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::invalid("somers_d: length mismatch"));
    }
    if predictions.len() < 2 {
        return Err(Error::invalid("somers_d needs at least two observations"));
    }
    let c = pair_counts(predictions, labels);
    let num = c.concordant as i128 - c.discordant as i128;
    let den = match variant {
        SomersVariant::AllPairs => {
            if c.concordant + c.discordant == 0 {
                return Err(Error::invalid("somers_d undefined: every pair is tied"));
            }
            c.concordant + c.discordant + c.tied
        }
        SomersVariant::TauRatio => {
            let n = predictions.len() as u64;
            let untied = n * (n - 1) / 2 - c.tied_labels;
            if untied == 0 {
                return Err(Error::invalid("somers_d undefined: every label is tied"));
            }
            untied
        }
    };
    Ok(num as f64 / den as f64)
}

/// Counts indexed `[true][predicted]` over a label space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<i32>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn get(&self, truth: i32, pred: i32) -> Option<u64> {
        let i = self.labels.iter().position(|&l| l == truth)?;
        let j = self.labels.iter().position(|&l| l == pred)?;
        Some(self.counts[i][j])
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// CSV with a `true\pred` corner cell, label header row and one row per true label.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\pred");
        for l in &self.labels {
            let _ = write!(s, ",{l}");
        }
        s.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            let _ = write!(s, "{l}");
            for c in row {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion_matrix(y: &[i32], pred: &[i32], space: &LabelSpace) -> Result<ConfusionMatrix> {
    if y.len() != pred.len() {
        return Err(Error::invalid("confusion_matrix: length mismatch"));
    }
    let k = space.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (idx, (&a, &b)) in y.iter().zip(pred).enumerate() {
        let i = space.index_of(a).ok_or_else(|| {
            Error::invalid(format!("true label {a} at position {idx} outside label space"))
        })?;
        let j = space.index_of(b).ok_or_else(|| {
            Error::invalid(format!("predicted label {b} at position {idx} outside label space"))
        })?;
        counts[i][j] += 1;
    }
    Ok(ConfusionMatrix {
        labels: space.labels().to_vec(),
        counts,
    })
}

/// Metric bundle for one evaluated split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    pub rmse: f64,
    pub macro_mae: f64,
    pub macro_rmse: f64,
    pub accuracy: f64,
    pub accuracy_at_1: f64,
    /// NaN when undefined (every pair tied, e.g. a constant predictor).
    pub somers_d: f64,
    pub confusion: ConfusionMatrix,
}

impl MetricReport {
    pub fn compute(y: &[i32], pred: &[i32], space: &LabelSpace) -> Result<Self> {
        let somers = if y.len() >= 2 {
            somers_d(pred, y).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        Ok(Self {
            mae: mae(y, pred)?,
            rmse: rmse(y, pred)?,
            macro_mae: macro_mae(y, pred)?,
            macro_rmse: macro_rmse(y, pred)?,
            accuracy: accuracy(y, pred)?,
            accuracy_at_1: accuracy_at_k(y, pred, 1)?,
            somers_d: somers,
            confusion: confusion_matrix(y, pred, space)?,
        })
    }
}
