//! Experiment harness: splits, cross-validation, identification and
//! verification scoring, one-way ANOVA, ablations and cross-condition transfer.

mod ablate;
mod anova;
mod cross;
pub mod fdist;
mod score;
mod split;
mod table;

use thiserror::Error;

use crate::featurize::FeatureError;
use crate::forest::ForestError;
use crate::signal::Condition;

pub use ablate::{ablate, ablation_table, band_subsets, electrode_subsets, AblationAxis, AblationRow, AblationSubset};
pub use anova::{anova_f, anova_oneway, AnovaEntry, AnovaReport, AnovaResult};
pub use cross::{cross_condition, cross_condition_grid, cross_condition_table, CrossCell, TrainSource};
pub use fdist::f_pvalue;
pub use score::{
    cross_validate, evaluate_identification, evaluate_verification, score_identification, score_verification,
    threshold_sweep, ConfigEcho, CvReport, EvalReport, SweepPoint, Task, UserScore, GENUINE, IMPOSTOR,
};
pub use split::{kfold, split_matrix, split_session_frames, Fold, SplitSpec, TestBlock};
pub use table::Table;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("a session needs at least 2 frames to split, got {0}")]
    TooFewFrames(usize),
    #[error("{rows} rows cannot form {k} folds")]
    TooFewRows { rows: usize, k: usize },
    #[error("test label '{0}' does not occur in the training data")]
    UnseenLabel(String),
    #[error("user '{user}' has no {condition} sessions")]
    MissingCondition { user: String, condition: Condition },
    #[error("within-group variance is zero (MS between = {ms_between})")]
    ZeroWithinVariance { ms_between: f64 },
    #[error("degenerate groups: {0}")]
    DegenerateGroups(String),
    #[error("invalid degrees of freedom ({df1}, {df2})")]
    InvalidDf { df1: u64, df2: u64 },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}
