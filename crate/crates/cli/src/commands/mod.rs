pub mod data;
pub mod experiments;
pub mod report;
pub mod train;

use std::fs;
use std::path::Path;

use musicid::featurize::{featurize_dataset, select_features, FeatureMatrix};
use musicid::ingest::{ColumnMapping, Dataset};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::{Command, GlobalArgs};

pub fn dispatch(
    command: &Command,
    config: &RunConfig,
    features: Option<&Path>,
    global: &GlobalArgs,
) -> Result<(), CliError> {
    match command {
        Command::Synth(args) => data::synth(args, config),
        Command::Ingest(args) => data::ingest(args, config),
        Command::Featurize => data::featurize(config),
        Command::Train(args) => train::train(args, config, features),
        Command::Identify(args) => train::identify(args, config, global),
        Command::Verify(args) => train::verify(args, config, global),
        Command::Ablate(args) => experiments::ablate(args, config, features),
        Command::CrossEval => experiments::cross_eval(config, features),
        Command::Anova => experiments::anova(config, features),
        Command::Importance(args) => experiments::importance(args, config, features),
        Command::Report => report::report(config),
    }
}

pub(crate) fn load_dataset(config: &RunConfig) -> Result<Dataset, CliError> {
    if !config.dataset.is_dir() {
        return Err(CliError::MissingInput(format!("dataset directory {}", config.dataset.display())));
    }
    let (dataset, _) = Dataset::load(&config.dataset, &ColumnMapping::canonical())?;
    if dataset.sessions.is_empty() {
        return Err(CliError::MissingInput(format!("no sessions below {}", config.dataset.display())));
    }
    Ok(dataset)
}

/// All 80 features, from `features` if given, else featurized from the dataset.
pub(crate) fn load_all_features(config: &RunConfig, features: Option<&Path>) -> Result<FeatureMatrix, CliError> {
    match features {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
            Ok(FeatureMatrix::read_csv(file)?)
        }
        None => Ok(featurize_dataset(&load_dataset(config)?, config.frame_len, config.hop)?),
    }
}

/// Features restricted to the configured selection.
pub(crate) fn load_features(config: &RunConfig, features: Option<&Path>) -> Result<FeatureMatrix, CliError> {
    Ok(select_features(&load_all_features(config, features)?, &config.selection)?)
}
