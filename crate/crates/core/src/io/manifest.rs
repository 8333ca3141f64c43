//! Run manifests: written when a run starts and finalized when it ends.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::IoError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Git-style object hash (`blob <len>\0<bytes>`) with SHA-256.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub command: Vec<String>,
    pub config: RunConfig,
    /// Hash of the canonical TOML form of `config`.
    pub input_hash: String,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub wall_seconds: Option<f64>,
    pub status: RunStatus,
    pub error: Option<String>,
    /// Free-form solver and diagnostic summary.
    pub summary: Option<serde_json::Value>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn begin(config: &RunConfig, command: Vec<String>) -> RunManifest {
        RunManifest {
            software: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            command,
            config: config.clone(),
            input_hash: content_hash(config.to_toml().as_bytes()),
            started_unix: unix_now(),
            finished_unix: None,
            wall_seconds: None,
            status: RunStatus::Running,
            error: None,
            summary: None,
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self, result: Result<serde_json::Value, String>) {
        let now = unix_now();
        self.finished_unix = Some(now);
        self.wall_seconds = Some(now - self.started_unix);
        match result {
            Ok(summary) => {
                self.status = RunStatus::Succeeded;
                self.summary = Some(summary);
            }
            Err(e) => {
                self.status = RunStatus::Failed;
                self.error = Some(e);
            }
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, IoError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| IoError::Invalid(e.to_string()))?;
        fs::write(&path, text).map_err(|e| IoError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<RunManifest, IoError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| IoError::Io { path: path.display().to_string(), message: e.to_string() })?;
        serde_json::from_str(&text).map_err(|e| IoError::Invalid(e.to_string()))
    }
}
