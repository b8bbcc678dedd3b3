//! Report and table files.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Version of the `report.json` layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Header of every table file.
pub const TABLE_HEADER: [&str; 7] = ["estimator_id", "params_hash", "seed", "value", "std_error", "n", "censored_fraction"];

/// One estimate in a table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub estimator_id: String,
    pub value: f64,
    pub std_error: f64,
    pub n: u64,
    pub censored_fraction: f64,
}

impl Row {
    pub fn new(id: impl Into<String>, e: &levy_potential::mc::MCEstimate) -> Self {
        Self {
            estimator_id: id.into(),
            value: e.value,
            std_error: e.std_error,
            n: e.n_samples,
            censored_fraction: e.censored_fraction,
        }
    }

    /// A deterministic quantity without sampling error.
    pub fn exact(id: impl Into<String>, value: f64) -> Self {
        Self {
            estimator_id: id.into(),
            value,
            std_error: 0.0,
            n: 0,
            censored_fraction: 0.0,
        }
    }
}

/// Outcome of one task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskReport {
    pub index: usize,
    pub task: String,
    pub pass: bool,
    /// Paths behind the task's headline estimate.
    pub n_effective: u64,
    pub metrics: serde_json::Value,
    pub failures: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Row>,
}

/// Content of `report.json`. It holds no wall-clock data, so reruns with the
/// same configuration reproduce it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub id: String,
    pub params_hash: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub tasks: Vec<TaskReport>,
    /// Set when the scenario could not be validated or a task raised an
    /// error.
    pub error: Option<String>,
    pub pass: bool,
}

/// SHA-256 of the canonical configuration, hex encoded.
pub fn params_hash(canonical_json: &str) -> String {
    hex::encode(Sha256::digest(canonical_json.as_bytes()))
}

impl Report {
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(dir.join("report.json"), text)
    }

    /// Writes `tables/<index>_<task>.csv` for a finished task.
    pub fn write_table(&self, dir: &Path, task: &TaskReport) -> io::Result<()> {
        let tables = dir.join("tables");
        fs::create_dir_all(&tables)?;
        let path = tables.join(format!("{:02}_{}.csv", task.index, task.task));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)?;
        w.write_record(TABLE_HEADER)?;
        for r in &task.rows {
            w.write_record([
                r.estimator_id.clone(),
                self.params_hash.clone(),
                self.seed.to_string(),
                r.value.to_string(),
                r.std_error.to_string(),
                r.n.to_string(),
                r.censored_fraction.to_string(),
            ])?;
        }
        w.flush()
    }
}
