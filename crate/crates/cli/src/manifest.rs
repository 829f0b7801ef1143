//! JSON run manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use ordinalkit::evaluation::SplitInfo;

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: PathBuf,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub created_at: String,
    /// Fully resolved settings; `evaluate --manifest` reruns from this.
    pub config: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetInfo>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub splits: Vec<SplitInfo>,
    /// Paths relative to the output directory.
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &str, config: Value) -> Self {
        Self {
            tool: "ordinalkit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            created_at: chrono::Utc::now().to_rfc3339(),
            config,
            dataset: None,
            splits: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_outputs(&mut self, dir: &Path, paths: &[PathBuf]) {
        self.outputs
            .extend(paths.iter().map(|p| p.strip_prefix(dir).unwrap_or(p).to_path_buf()));
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Model(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("manifest {}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}
