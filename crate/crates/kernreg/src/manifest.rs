//! Run manifests written beside every command output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of the configuration file bytes, if one was given.
    pub config_hash: Option<String>,
    pub input_hashes: Vec<InputHash>,
    pub tool_version: String,
    pub wall_time_seconds: f64,
    /// Deterministic for identical inputs; timing lives only in `wall_time_seconds`.
    pub result_summary: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::io(path, e))?))
}

/// `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

impl RunManifest {
    pub fn new(command_line: Vec<String>) -> Self {
        Self {
            command_line,
            config_hash: None,
            input_hashes: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: 0.0,
            result_summary: serde_json::Value::Null,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let sha256 = hash_file(path)?;
        self.input_hashes.push(InputHash { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn set_config(&mut self, path: &Path) -> Result<()> {
        self.config_hash = Some(hash_file(path)?);
        Ok(())
    }

    pub fn write_beside(&self, output: &Path) -> Result<()> {
        crate::report::write_json(&manifest_path(output), self)
    }
}
