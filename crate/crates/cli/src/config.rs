//! TOML run configuration.
//!
//! ```toml
//! seed = 17
//! output_dir = "runs/demo"          # optional
//! cv_folds = 5                       # used when a model lists several values
//!
//! [dataset]
//! path = "synth.csv"                 # relative to this file
//! format = "csv"                     # optional, inferred from the extension
//!
//! [plan]
//! kind = "expanding"                 # holdout | expanding | kfold
//! min_new = 100
//!
//! [[rounding]]
//! strategy = "graph"
//! grid = "R1"
//!
//! [[models]]
//! model = "ridge"
//! lambda = [0.1, 1.0, 10.0]          # arrays form the tuning grid
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use ordinalkit::data::DataFormat;
use ordinalkit::evaluation::{EvalConfig, ModelEntry, RoundingFit, SplitPlan, DEFAULT_CV_FOLDS};
use ordinalkit::rounding::RoundingStrategy;

use crate::error::{CliError, CliResult};

fn default_rounding() -> Vec<RoundingStrategy> {
    vec![RoundingStrategy::Half]
}

fn default_folds() -> usize {
    DEFAULT_CV_FOLDS
}

fn half() -> RoundingStrategy {
    RoundingStrategy::Half
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<DataFormat>,
}

impl DatasetConfig {
    pub fn resolved_format(&self) -> CliResult<DataFormat> {
        self.format
            .or_else(|| DataFormat::from_path(&self.path))
            .ok_or_else(|| CliError::usage(format!("cannot infer format of {}; set dataset.format", self.path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub plan: SplitPlan,
    #[serde(default = "default_rounding")]
    pub rounding: Vec<RoundingStrategy>,
    #[serde(default)]
    pub rounding_fit: RoundingFit,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default = "half")]
    pub tuning_rounding: RoundingStrategy,
    #[serde(default)]
    pub models: Vec<Value>,
}

impl RunConfig {
    /// Parses TOML; a relative dataset path is resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))?;
        if cfg.dataset.path.is_relative() {
            cfg.dataset.path = base_dir.join(&cfg.dataset.path);
        }
        if let Some(out) = &cfg.output_dir {
            if out.is_relative() {
                cfg.output_dir = Some(base_dir.join(out));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn model_entries(&self) -> CliResult<Vec<ModelEntry>> {
        self.models
            .iter()
            .enumerate()
            .map(|(i, m)| ModelEntry::from_value(m).map_err(|e| CliError::usage(format!("models[{i}]: {e}"))))
            .collect()
    }

    /// Validates everything that can be checked without data.
    pub fn eval_config(&self) -> CliResult<EvalConfig> {
        self.dataset.resolved_format()?;
        let cfg = EvalConfig {
            models: self.model_entries()?,
            rounding: self.rounding.clone(),
            plan: self.plan.clone(),
            seed: self.seed,
            cv_folds: self.cv_folds,
            tuning_rounding: self.tuning_rounding.clone(),
            rounding_fit: self.rounding_fit,
        };
        cfg.validate().map_err(CliError::usage)?;
        for r in cfg.rounding.iter().chain([&cfg.tuning_rounding]) {
            if let RoundingStrategy::Global { grid, .. }
            | RoundingStrategy::PerLevel { grid, .. }
            | RoundingStrategy::Graph { grid, .. } = r
            {
                grid.build().map_err(CliError::usage)?;
            }
        }
        Ok(cfg)
    }
}
