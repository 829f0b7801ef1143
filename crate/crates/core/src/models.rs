//! Model registry: declarative specs, fitted models and hyperparameter grids.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::baseline::{baseline_fit, BaselineModel, DEFAULT_K};
use crate::error::{Error, Result};
use crate::labels::LabelSpace;
use crate::learners::{
    fit_cart, fit_knn, fit_linear, fit_random_forest, BinaryBase,
    DecisionTree, ForestParams, KnnModel, LinearModel, Penalty, RandomForest, TreeParams,
    Weighting,
};
use crate::matrix::Matrix;
use crate::neural::{train, HeadKind, NeuralModel, NeuralParams, OrcnnNorm};
use crate::ordinal::{
    ord_fit, orf_fit, saoc_fit, threshold_fit, OrdParams, OrderedLogitModel, OrfModel, SaocModel,
    ThresholdLossModel, ThresholdParams, ThresholdVariant,
};

pub const MODEL_FORMAT_VERSION: u32 = 1;

fn d_lambda() -> f64 {
    1.0
}
fn d_epsilon() -> f64 {
    1.35
}
fn d_huber_lambda() -> f64 {
    1e-4
}
fn d_k() -> usize {
    DEFAULT_K
}
fn d_one() -> usize {
    1
}
fn d_trees() -> usize {
    100
}
fn d_true() -> bool {
    true
}
fn d_l2() -> f64 {
    1e-4
}
fn d_th_epochs() -> usize {
    100
}
fn d_th_lr() -> f64 {
    0.01
}
fn d_hidden() -> usize {
    64
}
fn d_nn_epochs() -> usize {
    200
}
fn d_nn_lr() -> f64 {
    0.01
}
fn d_batch() -> usize {
    32
}
fn d_momentum() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaocBase {
    #[default]
    Logistic,
    Forest,
}

/// Network hyperparameters shared by all neural heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    #[serde(default = "d_hidden")]
    pub hidden: usize,
    #[serde(default = "d_nn_epochs")]
    pub epochs: usize,
    #[serde(default = "d_nn_lr")]
    pub lr: f64,
    #[serde(default = "d_batch")]
    pub batch: usize,
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub orcnn_norm: OrcnnNorm,
}

/// A model family plus its hyperparameters, as written in a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Ols,
    Ridge {
        #[serde(default = "d_lambda")]
        lambda: f64,
    },
    Lasso {
        #[serde(default = "d_lambda")]
        lambda: f64,
    },
    Huber {
        #[serde(default = "d_epsilon")]
        epsilon: f64,
        #[serde(default = "d_huber_lambda")]
        lambda: f64,
    },
    Knn {
        #[serde(default = "d_k")]
        k: usize,
        #[serde(default)]
        weighting: Weighting,
    },
    Cart {
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "d_one")]
        min_samples_leaf: usize,
    },
    Rf {
        #[serde(default = "d_trees")]
        n_trees: usize,
        #[serde(default)]
        max_features: Option<usize>,
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "d_one")]
        min_samples_leaf: usize,
        #[serde(default = "d_true")]
        bootstrap: bool,
    },
    Baseline {
        #[serde(default = "d_k")]
        k: usize,
    },
    Saoc {
        #[serde(default)]
        base: SaocBase,
        #[serde(default = "d_l2")]
        l2: f64,
        #[serde(default = "d_trees")]
        n_trees: usize,
        #[serde(default)]
        max_features: Option<usize>,
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "d_one")]
        min_samples_leaf: usize,
    },
    Ord {
        #[serde(default)]
        l2: f64,
    },
    ImmediateThreshold {
        #[serde(default = "d_th_epochs")]
        epochs: usize,
        #[serde(default = "d_th_lr")]
        lr: f64,
        #[serde(default)]
        l2: f64,
    },
    AllThreshold {
        #[serde(default = "d_th_epochs")]
        epochs: usize,
        #[serde(default = "d_th_lr")]
        lr: f64,
        #[serde(default)]
        l2: f64,
    },
    Orf {
        #[serde(default = "d_trees")]
        n_trees: usize,
        #[serde(default)]
        max_features: Option<usize>,
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "d_one")]
        min_samples_leaf: usize,
    },
    Nnrank(#[serde(default = "NetSpec::default")] NetSpec),
    Orcnn(#[serde(default = "NetSpec::default")] NetSpec),
    Coral(#[serde(default = "NetSpec::default")] NetSpec),
    Corn(#[serde(default = "NetSpec::default")] NetSpec),
    Condor(#[serde(default = "NetSpec::default")] NetSpec),
    Spacecutter(#[serde(default = "NetSpec::default")] NetSpec),
}

impl Default for NetSpec {
    fn default() -> Self {
        Self {
            hidden: d_hidden(),
            epochs: d_nn_epochs(),
            lr: d_nn_lr(),
            batch: d_batch(),
            momentum: d_momentum(),
            orcnn_norm: OrcnnNorm::default(),
        }
    }
}

/// Registered model names, in help/listing order.
pub const MODEL_NAMES: [&str; 19] = [
    "ols",
    "ridge",
    "lasso",
    "huber",
    "knn",
    "cart",
    "rf",
    "baseline",
    "saoc",
    "ord",
    "immediate_threshold",
    "all_threshold",
    "orf",
    "nnrank",
    "orcnn",
    "coral",
    "corn",
    "condor",
    "spacecutter",
];

fn forest(n_trees: usize, max_features: Option<usize>, max_depth: Option<usize>, min_samples_leaf: usize, bootstrap: bool) -> ForestParams {
    ForestParams {
        n_trees,
        max_features,
        max_depth,
        min_samples_leaf,
        bootstrap,
    }
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Ols => "ols",
            ModelSpec::Ridge { .. } => "ridge",
            ModelSpec::Lasso { .. } => "lasso",
            ModelSpec::Huber { .. } => "huber",
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::Cart { .. } => "cart",
            ModelSpec::Rf { .. } => "rf",
            ModelSpec::Baseline { .. } => "baseline",
            ModelSpec::Saoc { .. } => "saoc",
            ModelSpec::Ord { .. } => "ord",
            ModelSpec::ImmediateThreshold { .. } => "immediate_threshold",
            ModelSpec::AllThreshold { .. } => "all_threshold",
            ModelSpec::Orf { .. } => "orf",
            ModelSpec::Nnrank(_) => "nnrank",
            ModelSpec::Orcnn(_) => "orcnn",
            ModelSpec::Coral(_) => "coral",
            ModelSpec::Corn(_) => "corn",
            ModelSpec::Condor(_) => "condor",
            ModelSpec::Spacecutter(_) => "spacecutter",
        }
    }

    /// Continuous regressors need a rounding strategy; ordinal models predict labels.
    pub fn is_regressor(&self) -> bool {
        matches!(
            self,
            ModelSpec::Ols
                | ModelSpec::Ridge { .. }
                | ModelSpec::Lasso { .. }
                | ModelSpec::Huber { .. }
                | ModelSpec::Knn { .. }
                | ModelSpec::Cart { .. }
                | ModelSpec::Rf { .. }
                | ModelSpec::Baseline { .. }
        )
    }

    /// Name plus non-default hyperparameters as compact `key=value` pairs.
    pub fn label(&self) -> String {
        let v = serde_json::to_value(self).expect("specs serialize");
        let mut parts = Vec::new();
        if let Value::Object(map) = v {
            for (k, val) in map {
                if k == "model" {
                    continue;
                }
                parts.push(format!("{k}={}", compact(&val)));
            }
        }
        if parts.is_empty() {
            self.name().to_string()
        } else {
            format!("{}({})", self.name(), parts.join(","))
        }
    }

    fn head(&self) -> Option<(HeadKind, NetSpec)> {
        match self {
            ModelSpec::Nnrank(n) => Some((HeadKind::Nnrank, *n)),
            ModelSpec::Orcnn(n) => Some((HeadKind::Orcnn, *n)),
            ModelSpec::Coral(n) => Some((HeadKind::Coral, *n)),
            ModelSpec::Corn(n) => Some((HeadKind::Corn, *n)),
            ModelSpec::Condor(n) => Some((HeadKind::Condor, *n)),
            ModelSpec::Spacecutter(n) => Some((HeadKind::Spacecutter, *n)),
            _ => None,
        }
    }

    /// Fits on `x` (already normalized by the caller) with labels `y`.
    pub fn fit(
        &self,
        x: &Matrix,
        feature_names: &[String],
        y: &[i32],
        space: &LabelSpace,
        seed: u64,
    ) -> Result<FittedModel> {
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let linear = |p| fit_linear(x, &yf, p).map(|m| FittedModel::Linear(m));
        Ok(match *self {
            ModelSpec::Ols => linear(Penalty::None)?,
            ModelSpec::Ridge { lambda } => linear(Penalty::L2 { lambda })?,
            ModelSpec::Lasso { lambda } => linear(Penalty::L1 { lambda })?,
            ModelSpec::Huber { epsilon, lambda } => linear(Penalty::Huber { epsilon, lambda })?,
            ModelSpec::Knn { k, weighting } => FittedModel::Knn(fit_knn(x, &yf, k, weighting)?),
            ModelSpec::Cart {
                max_depth,
                min_samples_leaf,
            } => FittedModel::Cart(fit_cart(
                x,
                &yf,
                TreeParams {
                    max_depth,
                    min_samples_leaf,
                },
            )?),
            ModelSpec::Rf {
                n_trees,
                max_features,
                max_depth,
                min_samples_leaf,
                bootstrap,
            } => FittedModel::Rf(fit_random_forest(
                x,
                &yf,
                forest(n_trees, max_features, max_depth, min_samples_leaf, bootstrap),
                seed,
            )?),
            ModelSpec::Baseline { k } => {
                FittedModel::Baseline(baseline_fit(x, feature_names, &yf, k)?)
            }
            ModelSpec::Saoc {
                base,
                l2,
                n_trees,
                max_features,
                max_depth,
                min_samples_leaf,
            } => {
                let b = match base {
                    SaocBase::Logistic => BinaryBase::Logistic { l2 },
                    SaocBase::Forest => BinaryBase::Forest {
                        params: forest(n_trees, max_features, max_depth, min_samples_leaf, true),
                    },
                };
                FittedModel::Saoc(saoc_fit(x, y, space, b, seed)?)
            }
            ModelSpec::Ord { l2 } => FittedModel::Ord(ord_fit(
                x,
                y,
                space,
                OrdParams {
                    l2,
                    ..Default::default()
                },
            )?),
            ModelSpec::ImmediateThreshold { epochs, lr, l2 } | ModelSpec::AllThreshold { epochs, lr, l2 } => {
                let variant = if matches!(self, ModelSpec::AllThreshold { .. }) {
                    ThresholdVariant::All
                } else {
                    ThresholdVariant::Immediate
                };
                FittedModel::Threshold(threshold_fit(
                    x,
                    y,
                    space,
                    ThresholdParams {
                        variant,
                        epochs,
                        lr,
                        l2,
                    },
                    seed,
                )?)
            }
            ModelSpec::Orf {
                n_trees,
                max_features,
                max_depth,
                min_samples_leaf,
            } => FittedModel::Orf(orf_fit(
                x,
                y,
                space,
                forest(n_trees, max_features, max_depth, min_samples_leaf, true),
                seed,
            )?),
            _ => {
                let (head, n) = self.head().expect("remaining variants are neural");
                let params = NeuralParams {
                    head,
                    hidden: n.hidden,
                    epochs: n.epochs,
                    lr: n.lr,
                    batch: n.batch,
                    momentum: n.momentum,
                    orcnn_norm: n.orcnn_norm,
                };
                FittedModel::Neural(train(x, y, space, params, seed)?.0)
            }
        })
    }
}

fn compact(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "none".into(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearModel),
    Knn(KnnModel),
    Cart(DecisionTree),
    Rf(RandomForest),
    Baseline(BaselineModel),
    Saoc(SaocModel),
    Ord(OrderedLogitModel),
    Threshold(ThresholdLossModel),
    Orf(OrfModel),
    Neural(NeuralModel),
}

/// What a fitted model emits: continuous scores or ordinal labels.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Raw(Vec<f64>),
    Labels(Vec<i32>),
}

impl FittedModel {
    pub fn predict(&self, x: &Matrix) -> Result<Prediction> {
        let check = |d: usize| {
            if d != x.cols() {
                Err(Error::invalid(format!("model expects {d} features, got {}", x.cols())))
            } else {
                Ok(())
            }
        };
        Ok(match self {
            FittedModel::Linear(m) => {
                check(m.weights.len())?;
                Prediction::Raw(m.predict(x))
            }
            FittedModel::Knn(m) => {
                check(m.x.cols())?;
                Prediction::Raw(m.predict(x))
            }
            FittedModel::Cart(m) => Prediction::Raw(m.predict(x)),
            FittedModel::Rf(m) => Prediction::Raw(m.predict(x)),
            FittedModel::Baseline(m) => Prediction::Raw(m.predict(x)?),
            FittedModel::Saoc(m) => Prediction::Labels(m.predict(x)?),
            FittedModel::Ord(m) => Prediction::Labels(m.predict(x)?),
            FittedModel::Threshold(m) => Prediction::Labels(m.predict(x)?),
            FittedModel::Orf(m) => Prediction::Labels(m.predict(x)?),
            FittedModel::Neural(m) => Prediction::Labels(m.predict(x)?),
        })
    }
}

/// Versioned JSON envelope for a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub model: FittedModel,
}

impl ModelDocument {
    pub fn new(spec: ModelSpec, model: FittedModel) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            spec,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s)?;
        let version = v.get("format_version").and_then(Value::as_u64);
        if version != Some(MODEL_FORMAT_VERSION as u64) {
            return Err(Error::invalid(format!(
                "unsupported model format version {version:?}, expected {MODEL_FORMAT_VERSION}"
            )));
        }
        Ok(serde_json::from_value(v)?)
    }
}

/// Expands list-valued hyperparameters into the cartesian product of specs.
/// Keys vary slowest-first in sorted key order, so the output order is stable.
pub fn expand_grid(entry: &Value) -> Result<Vec<ModelSpec>> {
    let Value::Object(map) = entry else {
        return Err(Error::invalid("model entry must be a table"));
    };
    let mut points: Vec<Map<String, Value>> = vec![Map::new()];
    for (key, val) in map {
        let options: Vec<Value> = match val {
            Value::Array(a) => {
                if a.is_empty() {
                    return Err(Error::invalid(format!("empty grid for `{key}`")));
                }
                a.clone()
            }
            other => vec![other.clone()],
        };
        points = points
            .into_iter()
            .flat_map(|p| {
                options.iter().map(move |o| {
                    let mut q = p.clone();
                    q.insert(key.clone(), o.clone());
                    q
                })
            })
            .collect();
    }
    points
        .into_iter()
        .map(|p| {
            serde_json::from_value(Value::Object(p))
                .map_err(|e| Error::invalid(format!("model entry: {e}")))
        })
        .collect()
}
