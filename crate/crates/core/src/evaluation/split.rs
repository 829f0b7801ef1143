//! Date-atomic splits: chronological holdout, expanding windows, k-fold.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_MIN_NEW: usize = 100;

fn d_min_new() -> usize {
    DEFAULT_MIN_NEW
}

fn d_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitPlan {
    /// Latest dates form the test set. `cutoff_date` wins over `test_fraction`.
    Holdout {
        #[serde(default)]
        test_fraction: Option<f64>,
        #[serde(default)]
        cutoff_date: Option<NaiveDate>,
    },
    Expanding {
        #[serde(default = "d_min_new")]
        min_new: usize,
        /// Rows dated before this form the first window instead of the earliest date alone.
        #[serde(default)]
        first_cutoff: Option<NaiveDate>,
    },
    Kfold {
        #[serde(default = "d_folds")]
        k: usize,
    },
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan::Holdout {
            test_fraction: None,
            cutoff_date: None,
        }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SplitPlan::Holdout {
                test_fraction: Some(f),
                ..
            } if !(f > 0.0 && f < 1.0) => Err(Error::invalid(format!("test_fraction {f} must lie in (0, 1)"))),
            SplitPlan::Expanding { min_new: 0, .. } => Err(Error::invalid("min_new must be at least 1")),
            SplitPlan::Kfold { k } if k < 2 => Err(Error::invalid("k-fold needs k >= 2")),
            _ => Ok(()),
        }
    }
}

/// Consecutive runs of equal dates over a date-sorted dataset.
pub fn date_groups(ds: &Dataset) -> Vec<(NaiveDate, Vec<usize>)> {
    let mut groups: Vec<(NaiveDate, Vec<usize>)> = Vec::new();
    for (i, r) in ds.rows().iter().enumerate() {
        match groups.last_mut() {
            Some((d, idx)) if *d == r.date => idx.push(i),
            _ => groups.push((r.date, vec![i])),
        }
    }
    groups
}

/// Returns `(train, test)` row indices.
pub fn chronological_split(
    ds: &Dataset,
    test_fraction: Option<f64>,
    cutoff_date: Option<NaiveDate>,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = ds.len();
    if n == 0 {
        return Err(Error::empty("cannot split an empty dataset"));
    }
    let split_at = if let Some(cut) = cutoff_date {
        ds.rows().iter().position(|r| r.date >= cut).unwrap_or(n)
    } else {
        let f = test_fraction.unwrap_or(DEFAULT_TEST_FRACTION);
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::invalid(format!("test_fraction {f} must lie in (0, 1)")));
        }
        let target = f * n as f64;
        let mut start = n;
        for (_, idx) in date_groups(ds).iter().rev() {
            start -= idx.len();
            if (n - start) as f64 >= target {
                break;
            }
        }
        if start == 0 {
            return Err(Error::invalid(format!(
                "no date boundary leaves a non-empty training set for test_fraction {f}; set cutoff_date instead"
            )));
        }
        start
    };
    if split_at == 0 {
        return Err(Error::invalid("cutoff date precedes every row: training set is empty"));
    }
    if split_at == n {
        return Err(Error::invalid("cutoff date follows every row: test set is empty"));
    }
    Ok(((0..split_at).collect(), (split_at..n).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub rows: Vec<usize>,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub windows: Vec<Window>,
}

impl WindowSet {
    pub fn sizes(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.rows.len()).collect()
    }
}

/// Groups consecutive date-group sizes into windows. The first window is
/// `first` groups; later windows close once they reach `min_new` rows, and a
/// short trailing remainder joins the last window unless that is the first.
pub fn window_group_spans(sizes: &[usize], first: usize, min_new: usize) -> Vec<std::ops::Range<usize>> {
    let mut spans = vec![0..first];
    let mut start = first;
    let mut count = 0;
    for (g, &s) in sizes.iter().enumerate().skip(first) {
        count += s;
        if count >= min_new {
            spans.push(start..g + 1);
            start = g + 1;
            count = 0;
        }
    }
    if start < sizes.len() {
        if spans.len() > 1 {
            spans.last_mut().expect("nonempty").end = sizes.len();
        } else {
            spans.push(start..sizes.len());
        }
    }
    spans
}

pub fn expanding_windows(ds: &Dataset, min_new: usize, first_cutoff: Option<NaiveDate>) -> Result<WindowSet> {
    if min_new == 0 {
        return Err(Error::invalid("min_new must be at least 1"));
    }
    let groups = date_groups(ds);
    if groups.len() < 2 {
        return Err(Error::invalid("expanding windows need at least two publication dates"));
    }
    let first = match first_cutoff {
        Some(cut) => groups.iter().take_while(|(d, _)| *d < cut).count().max(1),
        None => 1,
    };
    if first >= groups.len() {
        return Err(Error::invalid("first window cutoff leaves no later dates"));
    }
    let sizes: Vec<usize> = groups.iter().map(|(_, g)| g.len()).collect();
    let windows = window_group_spans(&sizes, first, min_new)
        .into_iter()
        .map(|span| Window {
            rows: groups[span.clone()].iter().flat_map(|(_, g)| g.iter().copied()).collect(),
            first_date: groups[span.start].0,
            last_date: groups[span.end - 1].0,
        })
        .collect();
    Ok(WindowSet { windows })
}

/// Seeded shuffle split into `k` folds whose sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!("k-fold needs 2 <= k <= n (k = {k}, n = {n})")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, 0));
    let mut folds = vec![Vec::new(); k];
    for (i, v) in idx.into_iter().enumerate() {
        folds[i % k].push(v);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Fails unless every training date precedes every test date.
pub fn assert_no_leak(ds: &Dataset, train: &[usize], test: &[usize]) -> Result<()> {
    let rows = ds.rows();
    let last_train = train.iter().map(|&i| rows[i].date).max();
    let first_test = test.iter().map(|&i| rows[i].date).min();
    if let (Some(a), Some(b)) = (last_train, first_test) {
        if b <= a {
            return Err(Error::Leakage(format!(
                "test date {b} is not after training date {a}"
            )));
        }
    }
    Ok(())
}
