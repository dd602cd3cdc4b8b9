//! Command-line front end for the musicid pipeline.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use musicid::{ChannelId, Condition, SignalKind, Stat};

pub use config::{Format, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "musicid", version, about = "Brainwave biometrics from music-stimulated EEG")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. Flags win over the config file.
#[derive(Debug, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset root laid out as <user>/<condition>/<index>.csv.
    #[arg(long, global = true, env = "MUSICID_DATASET")]
    pub dataset: Option<PathBuf>,
    /// Directory for every file the command writes.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Precomputed feature CSV used instead of featurizing the dataset.
    #[arg(long, global = true)]
    pub features: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Samples per frame.
    #[arg(long, global = true)]
    pub frame_len: Option<usize>,
    /// Samples between frame starts.
    #[arg(long, global = true)]
    pub hop: Option<usize>,
    /// Trees per forest.
    #[arg(long, global = true)]
    pub trees: Option<usize>,
    /// Maximum tree depth.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// Features tried per split (default: floor(sqrt(features))).
    #[arg(long, global = true)]
    pub mtry: Option<usize>,
    /// Verification threshold on the positive vote fraction.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Share of each session's frames used for training.
    #[arg(long, global = true)]
    pub train_fraction: Option<f64>,
    /// Training frames dropped before each session's test block.
    #[arg(long, global = true)]
    pub gap: Option<usize>,
    /// Cross-validation folds.
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// Electrodes to keep, e.g. AF7,AF8.
    #[arg(long, global = true, value_delimiter = ',')]
    pub channels: Option<Vec<ChannelId>>,
    /// Signals to keep, e.g. Alpha,Beta.
    #[arg(long, global = true, value_delimiter = ',')]
    pub signals: Option<Vec<SignalKind>>,
    /// Statistics to keep: mean, max, min, zcr.
    #[arg(long, global = true, value_delimiter = ',')]
    pub stats: Option<Vec<Stat>>,
    /// Table formats to write.
    #[arg(long, global = true, value_delimiter = ',')]
    pub formats: Option<Vec<Format>>,
}

impl GlobalArgs {
    /// Config file (if any) with flag overrides applied, validated.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.dataset {
            c.dataset = v.clone();
        }
        if let Some(v) = &self.output {
            c.output = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.frame_len {
            c.frame_len = v;
        }
        if let Some(v) = self.hop {
            c.hop = v;
        }
        if let Some(v) = self.trees {
            c.forest.n_trees = v;
        }
        if let Some(v) = self.depth {
            c.forest.max_depth = v;
        }
        if let Some(v) = self.mtry {
            c.forest.mtry = Some(v);
        }
        if let Some(v) = self.threshold {
            c.threshold = v;
        }
        if let Some(v) = self.train_fraction {
            c.split.train_fraction = v;
        }
        if let Some(v) = self.gap {
            c.split.gap = v;
        }
        if let Some(v) = self.folds {
            c.cv_folds = v;
        }
        if let Some(v) = &self.channels {
            c.selection.channels = v.iter().copied().collect();
        }
        if let Some(v) = &self.signals {
            c.selection.signals = v.iter().copied().collect();
        }
        if let Some(v) = &self.stats {
            c.selection.stats = v.iter().copied().collect();
        }
        if let Some(v) = &self.formats {
            let mut f = v.clone();
            f.sort();
            f.dedup();
            c.formats = f;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort in the dataset layout.
    Synth(commands::data::SynthArgs),
    /// Parse, validate and normalize session files.
    Ingest(commands::data::IngestArgs),
    /// Write the per-frame feature matrix.
    Featurize,
    /// Train identification and verification models.
    Train(commands::train::TrainArgs),
    /// Predict the user behind a session file.
    Identify(commands::train::IdentifyArgs),
    /// Check a session file against a claimed user.
    Verify(commands::train::VerifyArgs),
    /// Electrode and band ablations.
    Ablate(commands::experiments::AblateArgs),
    /// Train on one listening condition, test on the other.
    CrossEval,
    /// One-way ANOVA of features grouped by user.
    Anova,
    /// Feature importance ranking.
    Importance(commands::experiments::ImportanceArgs),
    /// Consolidate experiment reports into summary tables.
    Report,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    execute(cli)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let config = cli.global.resolve()?;
    let features = cli.global.features.clone();
    let threads = cli.global.threads;
    let task = move || commands::dispatch(&cli.command, &config, features.as_deref(), &cli.global);
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?
            .install(task),
        None => task(),
    }
}

/// Conditions to run: the requested ones, or all present in the data.
pub(crate) fn conditions_or_present(requested: &[Condition], present: impl IntoIterator<Item = Condition>) -> Vec<Condition> {
    if requested.is_empty() {
        present.into_iter().collect()
    } else {
        let mut c = requested.to_vec();
        c.sort();
        c.dedup();
        c
    }
}
