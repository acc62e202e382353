//! Manifests and CSV plumbing shared by the subcommands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;

/// Version tag of this build, `<crate version>+<git describe>`.
pub fn version() -> &'static str {
    env!("MTP_AMP_VERSION")
}

/// Echo of a run: enough to reproduce every CSV it wrote.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
}

pub fn write_manifest(dir: &Path, command: &str, config: &ExperimentConfig) -> Result<()> {
    let m = Manifest {
        version: version().to_string(),
        command: command.to_string(),
        config: config.clone(),
    };
    let text = serde_json::to_string_pretty(&m).map_err(mtp_amp::Error::from)?;
    atomic_write(&dir.join("manifest.json"), text.as_bytes())
}

/// Writes through a temporary sibling and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// A CSV table whose rows all start with `seed, version`.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    seed: u64,
}

impl Table {
    pub fn new(seed: u64, columns: impl IntoIterator<Item = String>) -> Self {
        let mut header = vec!["seed".to_string(), "version".to_string()];
        header.extend(columns);
        Table {
            header,
            rows: Vec::new(),
            seed,
        }
    }

    pub fn push(&mut self, fields: Vec<String>) {
        let mut row = vec![self.seed.to_string(), version().to_string()];
        row.extend(fields);
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| std::io::Error::other(e.to_string()).into())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_bytes()?)
    }
}

/// Column names `prefix_i_j` of a `d×d` matrix in row-major order.
pub fn matrix_columns(prefix: &str, d: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(d * d);
    for i in 1..=d {
        for j in 1..=d {
            out.push(format!("{prefix}_{i}_{j}"));
        }
    }
    out
}

pub fn vector_columns(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}_{j}")).collect()
}

pub fn matrix_fields(m: &nalgebra::DMatrix<f64>) -> Vec<String> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(num(m[(i, j)]));
        }
    }
    out
}
