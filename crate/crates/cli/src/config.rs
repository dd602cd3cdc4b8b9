//! Run configuration: a TOML file plus command-line overrides.
//!
//! ```toml
//! dataset = "data"
//! output = "out"
//! frame_len = 40
//! hop = 20
//! seed = 7
//! threshold = 0.5
//! cv_folds = 10
//! formats = ["csv", "text"]
//!
//! [forest]
//! n_trees = 100
//! max_depth = 10
//! min_samples_split = 2
//! bootstrap = true
//!
//! [split]
//! train_fraction = 0.8
//! test_block = "tail"
//! gap = 0
//!
//! [selection]
//! channels = ["TP9", "AF7", "AF8", "TP10"]
//! signals = ["Theta", "Alpha", "Beta", "Gamma", "Raw"]
//! stats = ["mean", "max", "min", "zcr"]
//! ```
//!
//! Every key is optional. The forest seed is the run seed.

use std::path::{Path, PathBuf};

use musicid::eval::SplitSpec;
use musicid::featurize::{DEFAULT_FRAME_LEN, DEFAULT_HOP};
use musicid::{FeatureSelection, ForestParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Table renderings written next to the JSON reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: usize,
    pub max_depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mtry: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl Default for ForestSection {
    fn default() -> Self {
        let p = ForestParams::default();
        ForestSection {
            n_trees: p.n_trees,
            max_depth: p.max_depth,
            mtry: p.mtry,
            min_samples_split: p.min_samples_split,
            bootstrap: p.bootstrap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub output: PathBuf,
    pub frame_len: usize,
    pub hop: usize,
    pub seed: u64,
    /// Verification decision threshold on the positive vote fraction.
    pub threshold: f64,
    pub cv_folds: usize,
    pub formats: Vec<Format>,
    pub forest: ForestSection,
    pub split: SplitSpec,
    pub selection: FeatureSelection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: PathBuf::from("data"),
            output: PathBuf::from("out"),
            frame_len: DEFAULT_FRAME_LEN,
            hop: DEFAULT_HOP,
            seed: 0,
            threshold: 0.5,
            cv_folds: 10,
            formats: vec![Format::Csv, Format::Text],
            forest: ForestSection::default(),
            split: SplitSpec::default(),
            selection: FeatureSelection::all(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<RunConfig, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.forest.n_trees,
            max_depth: self.forest.max_depth,
            mtry: self.forest.mtry,
            min_samples_split: self.forest.min_samples_split,
            bootstrap: self.forest.bootstrap,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.frame_len < 2 {
            return bad(format!("frame_len must be at least 2, got {}", self.frame_len));
        }
        if self.hop == 0 {
            return bad("hop must be at least 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} is outside (0, 1)", self.threshold));
        }
        if self.cv_folds < 2 {
            return bad(format!("cv_folds must be at least 2, got {}", self.cv_folds));
        }
        if self.selection.channels.is_empty() || self.selection.signals.is_empty() || self.selection.stats.is_empty() {
            return bad("feature selection is empty".into());
        }
        self.split.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.forest_params().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(m) = self.forest.mtry {
            let available = musicid::featurize::FeatureId::all().iter().filter(|f| self.selection.contains(f)).count();
            if m == 0 || m > available {
                return bad(format!("mtry {m} not in 1..={available}"));
            }
        }
        Ok(())
    }
}
