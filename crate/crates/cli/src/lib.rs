//! Batch front end: ingest, evaluate, tune, round-fit, report, synth.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use ordinalkit::models::MODEL_NAMES;
use ordinalkit::rounding::{GridPreset, RoundingStrategy};

pub use commands::*;
pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Registry listing appended to `--help`.
pub fn registry_help() -> String {
    format!(
        "Models: {}\nRounding strategies: {}\nGrid presets: {}\n\n\
         Environment: {} sets the default output directory.\n\
         Exit codes: 0 success, 1 config or usage error, 2 data error, 3 model failure.",
        MODEL_NAMES.join(", "),
        RoundingStrategy::NAMES.join(", "),
        GridPreset::ALL.join(", "),
        commands::OUTPUT_DIR_ENV,
    )
}
