//! Brainwave biometrics from music-stimulated EEG band powers.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`ingest`]: session CSV files, validation and Delta-band removal;
//! * [`featurize`]: overlapping frames and the 80 per-frame statistics;
//! * [`forest`]: random forests for identification and one-vs-rest verification;
//! * [`eval`]: splits, cross-validation, scoring, ANOVA, ablations and
//!   cross-condition transfer;
//! * [`synth`]: synthetic cohorts with controllable user separability.

pub mod eval;
pub mod featurize;
pub mod forest;
pub mod ingest;
pub mod seed;
pub mod signal;
pub mod synth;

pub use featurize::{FeatureId, FeatureMatrix, FeatureSelection, FeatureVector};
pub use forest::{Forest, ForestParams, OvrModel};
pub use ingest::{Dataset, Session, SessionMeta};
pub use signal::{ChannelId, Condition, SignalKind, Stat};
