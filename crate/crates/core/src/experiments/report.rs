use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::config::ExperimentConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub command: String,
    pub crate_name: String,
    pub crate_version: String,
    pub config_hash: String,
    /// Seed of every random sub-run, by name.
    pub seeds: BTreeMap<String, u64>,
    pub defaulted: Vec<String>,
}

/// Table written next to the report as `<command>_<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvBlock {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvBlock {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Shortest round-trip rendering of a float for CSV cells.
pub fn cell(v: f64) -> String {
    format!("{v}")
}

/// One command's output. Everything in it is a function of the resolved
/// configuration, so equal configurations give equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub provenance: Provenance,
    pub config: Value,
    pub results: Value,
    /// CSV files written alongside, relative to the output directory.
    pub files: Vec<String>,
    #[serde(skip)]
    pub blocks: Vec<CsvBlock>,
}

impl Report {
    pub fn new(command: &str, cfg: &ExperimentConfig, seeds: BTreeMap<String, u64>, results: impl Serialize, blocks: Vec<CsvBlock>) -> Result<Self> {
        let files = blocks.iter().map(|b| format!("{command}_{}.csv", b.name)).collect();
        Ok(Self {
            provenance: Provenance {
                command: command.into(),
                crate_name: env!("CARGO_PKG_NAME").into(),
                crate_version: env!("CARGO_PKG_VERSION").into(),
                config_hash: cfg.hash(),
                seeds,
                defaulted: cfg.defaulted.clone(),
            },
            config: serde_json::to_value(cfg)?,
            results: serde_json::to_value(results)?,
            files,
            blocks,
        })
    }

    /// Writes `<command>.json` and the CSV blocks into `dir`, creating it if
    /// needed, and returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let json = dir.join(format!("{}.json", self.provenance.command));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&json, text)?;
        written.push(json);
        for (block, file) in self.blocks.iter().zip(&self.files) {
            let path = dir.join(file);
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(&block.header)?;
            for row in &block.rows {
                w.write_record(row)?;
            }
            w.flush()?;
            written.push(path);
        }
        Ok(written)
    }
}
