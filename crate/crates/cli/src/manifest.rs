//! Run manifests: what was run, with which inputs, and what it produced.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::failure::Failure;
use crate::output::file_sha256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Full argument vector; `coforecast replay` re-runs it.
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    /// Resolved configuration, defaults filled in.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_ms: u64,
    pub status: String,
    pub exit_code: i32,
    pub stage: Option<String>,
    pub error: Option<String>,
}

/// Per-run bookkeeping handed to every command.
#[derive(Debug, Default)]
pub struct RunContext {
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
}

impl RunContext {
    pub fn record_input(&mut self, path: &Path) -> Result<String, Failure> {
        let sha256 = file_sha256(path)?;
        self.inputs.push(FileDigest { path: path.to_path_buf(), sha256: sha256.clone() });
        Ok(sha256)
    }

    pub fn set_config<T: Serialize>(&mut self, config: &T) {
        self.config = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
    }
}
