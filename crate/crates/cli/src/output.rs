//! Files written under the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use musicid::eval::Table;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub const REPORTS_DIR: &str = "reports";
pub const TABLES_DIR: &str = "tables";
pub const MODELS_DIR: &str = "models";
pub const SUMMARY_DIR: &str = "summary";

/// JSON report envelope: what ran, with which settings, and the result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile<T> {
    pub experiment: String,
    pub config: RunConfig,
    pub result: T,
}

pub struct Output<'a> {
    root: &'a Path,
    formats: &'a [Format],
}

impl<'a> Output<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        Output { root: &config.output, formats: &config.formats }
    }

    pub fn root(&self) -> &Path {
        self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write_bytes(&self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn write_report<T: Serialize>(
        &self,
        rel: &str,
        experiment: &str,
        config: &RunConfig,
        result: &T,
    ) -> Result<PathBuf, CliError> {
        let file = ReportFile { experiment: experiment.to_string(), config: config.clone(), result };
        let mut text = serde_json::to_string_pretty(&file).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    /// Writes `<stem>.csv` and/or `<stem>.txt` according to the configured formats.
    pub fn write_table(&self, stem: &str, table: &Table) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        for format in self.formats {
            let (ext, body) = match format {
                Format::Csv => ("csv", table.to_csv()),
                Format::Text => ("txt", table.to_text()),
            };
            written.push(self.write_bytes(&format!("{stem}.{ext}"), body.as_bytes())?);
        }
        Ok(written)
    }
}

pub fn read_report<T: DeserializeOwned>(path: &Path) -> Result<ReportFile<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::BadFile { path: path.to_path_buf(), reason: e.to_string() })
}
