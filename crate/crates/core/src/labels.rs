//! Ordered label sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, distinct integer labels `V_1 < ... < V_K` with `K >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i32>", into = "Vec<i32>")]
pub struct LabelSpace {
    labels: Vec<i32>,
}

impl LabelSpace {
    pub fn new(mut labels: Vec<i32>) -> Result<Self> {
        labels.sort_unstable();
        labels.dedup();
        if labels.len() < 2 {
            return Err(Error::invalid("label space needs at least two labels"));
        }
        Ok(Self { labels })
    }

    /// Contiguous space `min..=max`.
    pub fn range(min: i32, max: i32) -> Result<Self> {
        if max <= min {
            return Err(Error::invalid(format!("empty level range {min}..={max}")));
        }
        Ok(Self {
            labels: (min..=max).collect(),
        })
    }

    /// Distinct labels observed in `y`.
    pub fn from_observed(y: &[i32]) -> Result<Self> {
        Self::new(y.to_vec())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn min(&self) -> i32 {
        self.labels[0]
    }

    pub fn max(&self) -> i32 {
        self.labels[self.labels.len() - 1]
    }

    pub fn is_contiguous(&self) -> bool {
        self.labels.windows(2).all(|w| w[1] == w[0] + 1)
    }

    /// Zero-based rank of `label`.
    pub fn index_of(&self, label: i32) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    pub fn label(&self, index: usize) -> i32 {
        self.labels[index]
    }

    pub fn contains(&self, label: i32) -> bool {
        self.index_of(label).is_some()
    }

    /// Converts labels to zero-based ranks, failing on unknown labels.
    pub fn ranks(&self, y: &[i32]) -> Result<Vec<usize>> {
        y.iter()
            .enumerate()
            .map(|(i, &v)| {
                self.index_of(v).ok_or_else(|| {
                    Error::invalid(format!("label {v} at position {i} not in label space"))
                })
            })
            .collect()
    }
}

impl TryFrom<Vec<i32>> for LabelSpace {
    type Error = Error;

    fn try_from(v: Vec<i32>) -> Result<Self> {
        LabelSpace::new(v)
    }
}

impl From<LabelSpace> for Vec<i32> {
    fn from(s: LabelSpace) -> Self {
        s.labels
    }
}

/// Index of the largest score; ties go to the lowest index.
pub(crate) fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
