//! One-vs-rest verification models: one binary forest per enrolled user.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Forest, ForestError, ForestParams, Samples};
use crate::featurize::FeatureMatrix;
use crate::seed;

/// Binary label of frames from other users. Sorts before [`POSITIVE_LABEL`],
/// so tied votes reject.
pub const NEGATIVE_LABEL: &str = "negative";
pub const POSITIVE_LABEL: &str = "positive";

const OVR_FORMAT: &str = "musicid-ovr";
const OVR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrModel {
    pub threshold: f64,
    /// Binary forest per user id.
    pub models: BTreeMap<String, Forest>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verification {
    pub accept: bool,
    /// Fraction of the claimed user's trees voting positive.
    pub score: f64,
}

#[derive(Serialize, Deserialize)]
struct OvrFile {
    format: String,
    version: u32,
    model: OvrModel,
}

pub(crate) fn check_threshold(threshold: f64) -> Result<f64, ForestError> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(threshold)
    } else {
        Err(ForestError::InvalidThreshold(threshold))
    }
}

impl OvrModel {
    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<(), ForestError> {
        self.threshold = check_threshold(threshold)?;
        Ok(())
    }

    pub fn feature_names(&self) -> &[String] {
        self.models.values().next().map_or(&[], |f| f.feature_names.as_slice())
    }

    /// Positive vote fraction of `claimed_user`'s forest.
    pub fn score(&self, x: &[f64], claimed_user: &str) -> Result<f64, ForestError> {
        let forest = self
            .models
            .get(claimed_user)
            .ok_or_else(|| ForestError::UnknownUser(claimed_user.to_string()))?;
        let positive = forest.class_of(POSITIVE_LABEL).expect("binary label set");
        Ok(forest.predict(x)?.votes[positive])
    }

    /// Accepts iff the score reaches the model threshold.
    pub fn verify(&self, x: &[f64], claimed_user: &str) -> Result<Verification, ForestError> {
        let score = self.score(x, claimed_user)?;
        Ok(Verification { accept: score >= self.threshold, score })
    }

    pub fn to_json(&self) -> Result<String, ForestError> {
        let file = OvrFile { format: OVR_FORMAT.into(), version: OVR_VERSION, model: self.clone() };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<OvrModel, ForestError> {
        let file: OvrFile = serde_json::from_str(text)?;
        if file.format != OVR_FORMAT || file.version != OVR_VERSION {
            return Err(ForestError::Corrupt(format!("unsupported format {} v{}", file.format, file.version)));
        }
        file.model.validate()?;
        Ok(file.model)
    }

    /// Structural checks for a deserialized model.
    pub fn validate(&self) -> Result<(), ForestError> {
        check_threshold(self.threshold)?;
        for forest in self.models.values() {
            forest.validate()?;
            if forest.label_set != [NEGATIVE_LABEL, POSITIVE_LABEL] {
                return Err(ForestError::Corrupt("verification forest is not binary".into()));
            }
        }
        Ok(())
    }
}

/// Trains a positive-vs-rest forest for every user in `matrix`. Class
/// imbalance is kept as is. Each user's seed is derived from the run seed and
/// a hash of the user id.
pub fn train_ovr(matrix: &FeatureMatrix, params: &ForestParams, threshold: f64) -> Result<OvrModel, ForestError> {
    params.validate()?;
    let threshold = check_threshold(threshold)?;
    let users = matrix.users();
    if users.len() < 2 {
        return Err(ForestError::SingleClass(users.into_iter().next().unwrap_or_default()));
    }
    if matrix.len() < params.min_samples_split {
        return Err(ForestError::InsufficientData(format!("{} rows", matrix.len())));
    }
    let data = Samples::from_matrix(matrix, &users)?;
    let binary_labels = vec![NEGATIVE_LABEL.to_string(), POSITIVE_LABEL.to_string()];
    let feature_names = matrix.column_names();
    let models = users
        .par_iter()
        .enumerate()
        .map(|(class, user)| {
            let labels = data.labels.iter().map(|&l| usize::from(l == class)).collect();
            let binary = data.with_labels(labels, 2);
            let user_params = ForestParams {
                seed: seed::derive(params.seed, seed::label_hash(user)),
                ..params.clone()
            };
            Forest::fit(&binary, binary_labels.clone(), feature_names.clone(), &user_params)
                .map(|f| (user.clone(), f))
        })
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    Ok(OvrModel { threshold, models })
}
