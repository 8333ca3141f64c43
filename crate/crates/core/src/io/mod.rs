//! Configuration, report and field output.

pub mod config;
pub mod manifest;
pub mod rates;
pub mod vtk;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::fem::FemError;

pub use config::{parse_config, parse_config_with, ConfigError, Experiment, RunConfig, Scale};
pub use manifest::{content_hash, RunManifest, RunStatus};
pub use rates::{render_rate_table, write_rate_table, RATE_HEADER};
pub use vtk::{render_vtk, snapshot_data, write_vtk, VtkData};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// One JSON object per line.
pub struct JsonLines {
    path: String,
    out: BufWriter<File>,
}

impl JsonLines {
    pub fn create(path: &Path) -> Result<JsonLines, IoError> {
        let file =
            File::create(path).map_err(|e| IoError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Ok(JsonLines { path: path.display().to_string(), out: BufWriter::new(file) })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<(), IoError> {
        let line = serde_json::to_string(record).map_err(|e| IoError::Invalid(e.to_string()))?;
        writeln!(self.out, "{line}").map_err(|e| IoError::Io { path: self.path.clone(), message: e.to_string() })
    }

    pub fn flush(&mut self) -> Result<(), IoError> {
        self.out.flush().map_err(|e| IoError::Io { path: self.path.clone(), message: e.to_string() })
    }
}
