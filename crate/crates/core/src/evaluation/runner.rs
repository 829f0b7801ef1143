//! Runs a split plan over every configured model and rounding strategy.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::cv::{cross_validate, CvResult, DEFAULT_CV_FOLDS};
use super::split::{assert_no_leak, chronological_split, expanding_windows, kfold_indices, SplitPlan};
use crate::data::{Dataset, NormalizationParams};
use crate::error::{Error, Result};
use crate::labels::LabelSpace;
use crate::matrix::Matrix;
use crate::metrics::MetricReport;
use crate::models::{expand_grid, FittedModel, ModelSpec, Prediction};
use crate::rng::derive_seed;
use crate::rounding::{ThresholdMap, RoundingStrategy};

/// Rounding label used for models that emit labels directly.
pub const NO_ROUNDING: &str = "-";

/// One configured model: a hyperparameter grid plus a display label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub label: String,
    pub grid: Vec<ModelSpec>,
}

impl ModelEntry {
    /// Parses a model table. An optional `label` key names the entry;
    /// array-valued keys form the tuning grid.
    pub fn from_value(entry: &Value) -> Result<Self> {
        let mut map = match entry {
            Value::Object(m) => m.clone(),
            _ => return Err(Error::invalid("model entry must be a table")),
        };
        let label = match map.remove("label") {
            Some(Value::String(s)) if !s.is_empty() => Some(s),
            Some(_) => return Err(Error::invalid("model `label` must be a non-empty string")),
            None => None,
        };
        let grid = expand_grid(&Value::Object(map))?;
        let label = label.unwrap_or_else(|| {
            if grid.len() == 1 {
                grid[0].label()
            } else {
                grid[0].name().to_string()
            }
        });
        Ok(Self { label, grid })
    }

    pub fn single(spec: ModelSpec) -> Self {
        Self {
            label: spec.label(),
            grid: vec![spec],
        }
    }
}

/// Where rounding thresholds are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "on", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoundingFit {
    /// Training predictions of the model that is scored.
    #[default]
    Train,
    /// A date-atomic tail of the training rows is held out; the model used for
    /// scoring is fitted on the rest and thresholds on the held-out predictions.
    Validation { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub models: Vec<ModelEntry>,
    pub rounding: Vec<RoundingStrategy>,
    pub plan: SplitPlan,
    pub seed: u64,
    pub cv_folds: usize,
    pub tuning_rounding: RoundingStrategy,
    pub rounding_fit: RoundingFit,
}

impl EvalConfig {
    pub fn new(models: Vec<ModelEntry>, plan: SplitPlan, seed: u64) -> Self {
        Self {
            models,
            rounding: vec![RoundingStrategy::Half],
            plan,
            seed,
            cv_folds: DEFAULT_CV_FOLDS,
            tuning_rounding: RoundingStrategy::Half,
            rounding_fit: RoundingFit::Train,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        if self.cv_folds < 2 {
            return Err(Error::invalid("cv_folds must be at least 2"));
        }
        if let RoundingFit::Validation { fraction } = self.rounding_fit {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::invalid(format!("validation fraction {fraction} must lie in (0, 1)")));
            }
        }
        if self.models.iter().any(|m| m.grid.is_empty()) {
            return Err(Error::invalid("empty hyperparameter grid"));
        }
        let mut labels: Vec<&str> = self.models.iter().map(|m| m.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate model label `{}`", w[0])));
        }
        Ok(())
    }

    fn rounding_for(&self, spec: &ModelSpec) -> Vec<Option<&RoundingStrategy>> {
        if spec.is_regressor() {
            if self.rounding.is_empty() {
                vec![Some(&RoundingStrategy::Half)]
            } else {
                self.rounding.iter().map(Some).collect()
            }
        } else {
            vec![None]
        }
    }
}

/// Train/test row indices for one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub label: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub label: String,
    pub n_train: usize,
    pub n_test: usize,
    pub train_last_date: NaiveDate,
    pub test_first_date: NaiveDate,
    pub test_last_date: NaiveDate,
}

/// Materializes the plan's evaluations. Expanding plans train on the union
/// of windows 1..w and test on window w+1.
pub fn plan_splits(ds: &Dataset, plan: &SplitPlan, seed: u64) -> Result<Vec<Split>> {
    plan.validate()?;
    match *plan {
        SplitPlan::Holdout {
            test_fraction,
            cutoff_date,
        } => {
            let (train, test) = chronological_split(ds, test_fraction, cutoff_date)?;
            Ok(vec![Split {
                label: "holdout".into(),
                train,
                test,
            }])
        }
        SplitPlan::Expanding { min_new, first_cutoff } => {
            let ws = expanding_windows(ds, min_new, first_cutoff)?;
            let mut train = Vec::new();
            let mut out = Vec::new();
            for (w, pair) in ws.windows.windows(2).enumerate() {
                train.extend_from_slice(&pair[0].rows);
                out.push(Split {
                    label: format!("w{}", w + 2),
                    train: train.clone(),
                    test: pair[1].rows.clone(),
                });
            }
            Ok(out)
        }
        SplitPlan::Kfold { k } => {
            let folds = kfold_indices(ds.len(), k, derive_seed(seed, 0x6b66))?;
            Ok((0..k)
                .map(|f| {
                    let mut train: Vec<usize> =
                        (0..k).filter(|&j| j != f).flat_map(|j| folds[j].iter().copied()).collect();
                    train.sort_unstable();
                    Split {
                        label: format!("fold{}", f + 1),
                        train,
                        test: folds[f].clone(),
                    }
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok {
        metrics: MetricReport,
        /// Fitted rounding offsets, for regressors.
        thresholds: Option<ThresholdMap>,
    },
    Failed {
        error: String,
    },
}

/// One (split, model, rounding) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub split: String,
    pub model: String,
    pub rounding: String,
    /// Hyperparameters actually fitted (after tuning); absent if tuning failed.
    pub spec: Option<ModelSpec>,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub outcome: CellOutcome,
}

impl Cell {
    pub fn metrics(&self) -> Option<&MetricReport> {
        match &self.outcome {
            CellOutcome::Ok { metrics, .. } => Some(metrics),
            CellOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub plan: SplitPlan,
    pub seed: u64,
    pub labels: Vec<i32>,
    pub splits: Vec<SplitInfo>,
    /// (model label, rounding label) pairs in report order.
    pub rows: Vec<(String, String)>,
    /// Split-major, then model, then rounding.
    pub cells: Vec<Cell>,
    pub tuning: Vec<TuningRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningRecord {
    pub split: String,
    pub model: String,
    pub result: Option<CvResult>,
}

impl EvalReport {
    pub fn cells_for<'a>(&'a self, model: &'a str, rounding: &'a str) -> impl Iterator<Item = &'a Cell> + 'a {
        self.cells
            .iter()
            .filter(move |c| c.model == model && c.rounding == rounding)
    }

    pub fn is_windowed(&self) -> bool {
        !matches!(self.plan, SplitPlan::Holdout { .. })
    }
}

pub(crate) fn fit_normalized(
    spec: &ModelSpec,
    x: &Matrix,
    names: &[String],
    y: &[i32],
    space: &LabelSpace,
    seed: u64,
) -> Result<(NormalizationParams, FittedModel)> {
    let norm = NormalizationParams::fit(x)?;
    let model = spec.fit(&norm.transform(x)?, names, y, space, seed)?;
    Ok((norm, model))
}

pub(crate) fn to_labels(raw: &[f64], map: &ThresholdMap, space: &LabelSpace) -> Result<Vec<i32>> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model("non-finite raw prediction".into()));
    }
    crate::rounding::apply_thresholds(raw, map, space)
}

fn raw_of(p: Prediction) -> Result<Vec<f64>> {
    match p {
        Prediction::Raw(r) => Ok(r),
        Prediction::Labels(_) => Err(Error::Model("expected continuous predictions".into())),
    }
}

struct Task<'a> {
    split_idx: usize,
    split: &'a Split,
    model_idx: usize,
    entry: &'a ModelEntry,
}

/// Runs `config.plan` on `ds`. Failed fits become failed cells; a leak
/// between train and test dates aborts the run.
pub fn run_evaluation(ds: &Dataset, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let space = ds.level_space()?;
    let splits = plan_splits(ds, &config.plan, config.seed)?;
    let chronological = !matches!(config.plan, SplitPlan::Kfold { .. });
    let rows_ref = ds.rows();
    let mut infos = Vec::with_capacity(splits.len());
    for s in &splits {
        if chronological {
            assert_no_leak(ds, &s.train, &s.test)?;
        }
        let dates = |idx: &[usize]| idx.iter().map(|&i| rows_ref[i].date).collect::<Vec<_>>();
        let (tr, te) = (dates(&s.train), dates(&s.test));
        infos.push(SplitInfo {
            label: s.label.clone(),
            n_train: s.train.len(),
            n_test: s.test.len(),
            train_last_date: *tr.iter().max().ok_or_else(|| Error::empty("empty training split"))?,
            test_first_date: *te.iter().min().ok_or_else(|| Error::empty("empty test split"))?,
            test_last_date: *te.iter().max().expect("nonempty"),
        });
    }

    let x = ds.features();
    let y = ds.levels();
    let names = ds.feature_names();
    let tasks: Vec<Task> = splits
        .iter()
        .enumerate()
        .flat_map(|(si, s)| {
            config.models.iter().enumerate().map(move |(mi, e)| Task {
                split_idx: si,
                split: s,
                model_idx: mi,
                entry: e,
            })
        })
        .collect();
    let results: Vec<(Vec<Cell>, Option<TuningRecord>)> = tasks
        .par_iter()
        .map(|t| run_task(t, ds, &x, &y, names, &space, config))
        .collect();

    let mut cells = Vec::new();
    let mut tuning = Vec::new();
    for (c, t) in results {
        cells.extend(c);
        tuning.extend(t);
    }
    let mut rows: Vec<(String, String)> = Vec::new();
    for c in &cells {
        let key = (c.model.clone(), c.rounding.clone());
        if !rows.contains(&key) {
            rows.push(key);
        }
    }
    Ok(EvalReport {
        plan: config.plan.clone(),
        seed: config.seed,
        labels: space.labels().to_vec(),
        splits: infos,
        rows,
        cells,
        tuning,
    })
}

fn run_task(
    t: &Task,
    ds: &Dataset,
    x: &Matrix,
    y: &[i32],
    names: &[String],
    space: &LabelSpace,
    config: &EvalConfig,
) -> (Vec<Cell>, Option<TuningRecord>) {
    let seed = derive_seed(derive_seed(config.seed, t.split_idx as u64), t.model_idx as u64);
    let x_train = x.select_rows(&t.split.train);
    let y_train: Vec<i32> = t.split.train.iter().map(|&i| y[i]).collect();
    let x_test = x.select_rows(&t.split.test);
    let y_test: Vec<i32> = t.split.test.iter().map(|&i| y[i]).collect();

    let mut record = None;
    let spec = if t.entry.grid.len() > 1 {
        let res = cross_validate(
            &t.entry.grid,
            &x_train,
            names,
            &y_train,
            space,
            config.cv_folds,
            &config.tuning_rounding,
            derive_seed(seed, 2000),
        );
        let spec = res.as_ref().map(|r| r.best_spec.clone()).map_err(|e| e.to_string());
        record = Some(TuningRecord {
            split: t.split.label.clone(),
            model: t.entry.label.clone(),
            result: res.ok(),
        });
        spec
    } else {
        Ok(t.entry.grid[0].clone())
    };

    let cell = |rounding: &str, spec: Option<&ModelSpec>, outcome: CellOutcome| Cell {
        split: t.split.label.clone(),
        model: t.entry.label.clone(),
        rounding: rounding.to_string(),
        spec: spec.cloned(),
        seed,
        n_train: t.split.train.len(),
        n_test: t.split.test.len(),
        outcome,
    };
    let failed = |e: &dyn std::fmt::Display| CellOutcome::Failed { error: e.to_string() };
    let rlabel = |r: Option<&RoundingStrategy>| r.map_or(NO_ROUNDING.to_string(), |r| r.label());

    let spec = match spec {
        Ok(s) => s,
        Err(e) => {
            let cells = config
                .rounding_for(&t.entry.grid[0])
                .into_iter()
                .map(|r| cell(&rlabel(r), None, failed(&format!("tuning failed: {e}"))))
                .collect();
            return (cells, record);
        }
    };
    let roundings = config.rounding_for(&spec);

    if !spec.is_regressor() {
        let outcome = fit_normalized(&spec, &x_train, names, &y_train, space, seed)
            .and_then(|(norm, m)| m.predict(&norm.transform(&x_test)?))
            .and_then(|p| match p {
                Prediction::Labels(l) => MetricReport::compute(&y_test, &l, space),
                Prediction::Raw(_) => Err(Error::Model("expected ordinal labels".into())),
            });
        let outcome = match outcome {
            Ok(metrics) => CellOutcome::Ok {
                metrics,
                thresholds: None,
            },
            Err(e) => failed(&e),
        };
        return (vec![cell(NO_ROUNDING, Some(&spec), outcome)], record);
    }

    // Regressor: fit once, then one cell per rounding strategy.
    let fitted: Result<(Vec<f64>, Vec<f64>, Vec<i32>)> = (|| {
        let (fit_rows, tune_x, tune_y) = match config.rounding_fit {
            RoundingFit::Train => (t.split.train.clone(), None, None),
            RoundingFit::Validation { fraction } => {
                let sub = ds.subset(&t.split.train);
                let (inner, val) = chronological_split(&sub, Some(fraction), None)?;
                let map = |idx: &[usize]| idx.iter().map(|&i| t.split.train[i]).collect::<Vec<_>>();
                let val = map(&val);
                (
                    map(&inner),
                    Some(x.select_rows(&val)),
                    Some(val.iter().map(|&i| y[i]).collect::<Vec<_>>()),
                )
            }
        };
        let xf = x.select_rows(&fit_rows);
        let yf: Vec<i32> = fit_rows.iter().map(|&i| y[i]).collect();
        let (norm, model) = fit_normalized(&spec, &xf, names, &yf, space, seed)?;
        let tune_x = tune_x.unwrap_or(xf);
        let tune_y = tune_y.unwrap_or(yf);
        let raw_tune = raw_of(model.predict(&norm.transform(&tune_x)?)?)?;
        let raw_test = raw_of(model.predict(&norm.transform(&x_test)?)?)?;
        Ok((raw_tune, raw_test, tune_y))
    })();

    let cells = roundings
        .into_iter()
        .enumerate()
        .map(|(r, strategy)| {
            let strategy = strategy.expect("regressors always round");
            let label = strategy.label();
            let outcome = match &fitted {
                Err(e) => failed(e),
                Ok((raw_tune, raw_test, tune_y)) => {
                    let res = strategy
                        .fit(raw_tune, tune_y, space, derive_seed(seed, 1000 + r as u64))
                        .and_then(|map| {
                            let pred = to_labels(raw_test, &map, space)?;
                            Ok((MetricReport::compute(&y_test, &pred, space)?, map))
                        });
                    match res {
                        Ok((metrics, map)) => CellOutcome::Ok {
                            metrics,
                            thresholds: Some(map),
                        },
                        Err(e) => failed(&e),
                    }
                }
            };
            cell(&label, Some(&spec), outcome)
        })
        .collect();
    (cells, record)
}
