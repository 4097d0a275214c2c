//! CSV tables and JSON run-metadata sidecars.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A table row with a fixed header.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn to_csv_string<R: CsvRow>(rows: &[R]) -> String {
    let mut s = R::HEADER.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.fields().join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv<R: CsvRow>(path: impl AsRef<Path>, rows: &[R]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(to_csv_string(rows).as_bytes())?;
    f.flush()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance of one output file. Contains no timestamps, so equal runs
/// produce equal sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub command: String,
    pub file: String,
    pub rows: usize,
    pub seed: u64,
    pub mode: String,
    /// SHA-256 of the checkpoint file the data came from.
    pub checkpoint_id: Option<String>,
    /// SHA-256 of the configuration text in effect.
    pub config_hash: String,
    pub version: String,
}

impl RunMetadata {
    pub fn new(command: &str, seed: u64, mode: &str, checkpoint_id: Option<String>, config_hash: String) -> Self {
        Self {
            command: command.to_string(),
            file: String::new(),
            rows: 0,
            seed,
            mode: mode.to_string(),
            checkpoint_id,
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// `dir/name.csv` pairs with `dir/name.meta.json`.
    pub fn sidecar_path(data: &Path) -> PathBuf {
        data.with_extension("meta.json")
    }

    /// Writes the sidecar of `data`, recording its file name and row count.
    pub fn write_for(&self, data: &Path, rows: usize) -> std::io::Result<PathBuf> {
        let meta = Self {
            file: data.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            rows,
            ..self.clone()
        };
        let path = Self::sidecar_path(data);
        let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

/// Writes `dir/name.csv` and its sidecar; returns the CSV path.
pub fn write_table<R: CsvRow>(dir: &Path, name: &str, rows: &[R], meta: &RunMetadata) -> std::io::Result<PathBuf> {
    let path = dir.join(format!("{name}.csv"));
    write_csv(&path, rows)?;
    meta.write_for(&path, rows.len())?;
    Ok(path)
}
