//! Random forest classifier built from CART trees.
//!
//! Trees are grown on bootstrap resamples with `mtry` candidate features per
//! split, gini impurity as the split criterion and midpoint thresholds. Each
//! tree draws from its own ChaCha8 stream seeded by `derive(seed, tree_index)`,
//! so a forest is identical whatever the thread count.

mod ovr;
mod split;
mod tree;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::FeatureMatrix;
use crate::seed;

pub use ovr::{train_ovr, OvrModel, Verification, NEGATIVE_LABEL, POSITIVE_LABEL};
pub use split::{best_split, gini_impurity, Split};
pub use tree::{majority, FlatTree, Node, Tree};

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("training data contains a single class '{0}'")]
    SingleClass(String),
    #[error("insufficient training data: {0}")]
    InsufficientData(String),
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("feature columns do not match the model: {0}")]
    ColumnMismatch(String),
    #[error("unknown user '{0}'")]
    UnknownUser(String),
    #[error("decision threshold {0} is outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("corrupt model: {0}")]
    Corrupt(String),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Forest hyper-parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Candidate features per split; `None` means `floor(sqrt(n_features))`.
    #[serde(default)]
    pub mtry: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: 10, mtry: None, min_samples_split: 2, bootstrap: true, seed: 0 }
    }
}

impl ForestParams {
    pub fn with_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn with_trees(mut self, n_trees: usize) -> Self {
        self.n_trees = n_trees;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Effective `mtry` for `n_features` columns.
    pub fn resolve_mtry(&self, n_features: usize) -> Result<usize, ForestError> {
        let m = self.mtry.unwrap_or_else(|| ((n_features as f64).sqrt().floor() as usize).max(1));
        if m == 0 || m > n_features {
            return Err(ForestError::InvalidParams(format!("mtry {m} not in 1..={n_features}")));
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidParams("n_trees must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(ForestError::InvalidParams("max_depth must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(ForestError::InvalidParams("min_samples_split must be >= 2".into()));
        }
        Ok(())
    }
}

/// Dense row-major training matrix with class indices.
#[derive(Debug, Clone)]
pub struct Samples {
    values: Vec<f64>,
    pub n_features: usize,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Samples {
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self, ForestError> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(ForestError::InsufficientData("rows and labels differ in length".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for row in rows {
            if row.len() != n_features {
                return Err(ForestError::DimensionMismatch { expected: n_features, actual: row.len() });
            }
            values.extend_from_slice(row);
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Samples { values, n_features, labels, n_classes })
    }

    /// Dense view of `matrix` with labels indexed into the sorted user list.
    pub fn from_matrix(matrix: &FeatureMatrix, label_set: &[String]) -> Result<Self, ForestError> {
        let mut values = Vec::with_capacity(matrix.len() * matrix.n_features());
        let mut labels = Vec::with_capacity(matrix.len());
        for row in &matrix.rows {
            if row.values.len() != matrix.n_features() {
                return Err(ForestError::DimensionMismatch { expected: matrix.n_features(), actual: row.values.len() });
            }
            let label = label_set
                .binary_search_by(|l| l.as_str().cmp(row.origin.user_id()))
                .map_err(|_| ForestError::UnknownUser(row.origin.user_id().to_string()))?;
            values.extend_from_slice(&row.values);
            labels.push(label);
        }
        Ok(Samples { values, n_features: matrix.n_features(), labels, n_classes: label_set.len() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.values[row * self.n_features + feature]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_features..(row + 1) * self.n_features]
    }

    pub(crate) fn with_labels(&self, labels: Vec<usize>, n_classes: usize) -> Samples {
        Samples { values: self.values.clone(), n_features: self.n_features, labels, n_classes }
    }
}

/// Forest prediction for one feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Index into the forest's label set.
    pub class: usize,
    /// Fraction of trees voting for each label; sums to 1.
    pub votes: Vec<f64>,
}

/// A trained ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    /// Sorted, duplicate-free class names.
    pub label_set: Vec<String>,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
}

const FOREST_FORMAT: &str = "musicid-forest";
const FOREST_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ForestFile {
    format: String,
    version: u32,
    forest: Forest,
}

impl Forest {
    /// Grows a forest on already-indexed samples. A single class is allowed
    /// here (every tree is then one leaf).
    pub fn fit(
        data: &Samples,
        label_set: Vec<String>,
        feature_names: Vec<String>,
        params: &ForestParams,
    ) -> Result<Forest, ForestError> {
        params.validate()?;
        if data.is_empty() {
            return Err(ForestError::InsufficientData("no training rows".into()));
        }
        if data.n_classes > label_set.len() {
            return Err(ForestError::InsufficientData("labels exceed the label set".into()));
        }
        if feature_names.len() != data.n_features {
            return Err(ForestError::DimensionMismatch { expected: feature_names.len(), actual: data.n_features });
        }
        let config = tree::GrowConfig {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            mtry: params.resolve_mtry(data.n_features)?,
        };
        // pad the class histogram to the full label set
        let padded;
        let data = if data.n_classes < label_set.len() {
            padded = data.with_labels(data.labels.clone(), label_set.len());
            &padded
        } else {
            data
        };
        let n = data.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive(params.seed, t as u64));
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                tree::grow_tree(data, rows, &config, rng)
            })
            .collect();
        Ok(Forest { params: params.clone(), label_set, feature_names, trees })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn label(&self, class: usize) -> &str {
        &self.label_set[class]
    }

    pub fn class_of(&self, label: &str) -> Option<usize> {
        self.label_set.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    /// Plurality vote of the trees; ties go to the lowest class index
    /// (label sets are sorted, so the lexicographically smallest label).
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ForestError> {
        if x.len() != self.n_features() {
            return Err(ForestError::DimensionMismatch { expected: self.n_features(), actual: x.len() });
        }
        let mut counts = vec![0u32; self.label_set.len()];
        for tree in &self.trees {
            counts[tree.vote(x)] += 1;
        }
        let total = self.trees.len() as f64;
        Ok(Prediction { class: majority(&counts), votes: counts.iter().map(|&c| f64::from(c) / total).collect() })
    }

    /// Checks that `matrix` has exactly this forest's feature columns.
    pub fn check_columns(&self, matrix: &FeatureMatrix) -> Result<(), ForestError> {
        let names = matrix.column_names();
        if names != self.feature_names {
            return Err(ForestError::ColumnMismatch(format!(
                "model has {} columns, data has {}",
                self.feature_names.len(),
                names.len()
            )));
        }
        Ok(())
    }

    pub fn predict_matrix(&self, matrix: &FeatureMatrix) -> Result<Vec<Prediction>, ForestError> {
        self.check_columns(matrix)?;
        matrix.rows.iter().map(|r| self.predict(&r.values)).collect()
    }

    /// Mean decrease in gini impurity per feature, normalized to sum to 1
    /// (all zeros when no tree has a split).
    pub fn feature_importance(&self) -> Vec<f64> {
        let n = self.n_features();
        let mut total = vec![0.0; n];
        for tree in &self.trees {
            for (acc, d) in total.iter_mut().zip(tree.impurity_decreases(n)) {
                *acc += d;
            }
        }
        let trees = self.trees.len() as f64;
        total.iter_mut().for_each(|v| *v /= trees);
        let sum: f64 = total.iter().sum();
        if sum > 0.0 {
            total.iter_mut().for_each(|v| *v /= sum);
        }
        total
    }

    /// `(name, importance)` sorted by decreasing importance, ties by column order.
    pub fn ranked_importance(&self) -> Vec<(String, f64)> {
        let mut ranked: Vec<(String, f64)> =
            self.feature_names.iter().cloned().zip(self.feature_importance()).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        ranked
    }

    pub fn max_depth_reached(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> Result<String, ForestError> {
        let file = ForestFile { format: FOREST_FORMAT.into(), version: FOREST_VERSION, forest: self.clone() };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Forest, ForestError> {
        let file: ForestFile = serde_json::from_str(text)?;
        if file.format != FOREST_FORMAT || file.version != FOREST_VERSION {
            return Err(ForestError::Corrupt(format!("unsupported format {} v{}", file.format, file.version)));
        }
        file.forest.validate()?;
        Ok(file.forest)
    }

    /// Structural checks for a deserialized forest.
    pub fn validate(&self) -> Result<(), ForestError> {
        if !self.label_set.windows(2).all(|w| w[0] < w[1]) {
            return Err(ForestError::Corrupt("label set not sorted and unique".into()));
        }
        for tree in &self.trees {
            if tree.max_feature().is_some_and(|f| f >= self.n_features()) {
                return Err(ForestError::Corrupt("tree references a missing feature".into()));
            }
            for node in tree.nodes() {
                if let Node::Leaf { class_counts } = node {
                    if class_counts.len() != self.label_set.len() {
                        return Err(ForestError::Corrupt("leaf histogram size mismatch".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Trains a multi-class forest on `matrix`, labels being user ids.
pub fn train_forest(matrix: &FeatureMatrix, params: &ForestParams) -> Result<Forest, ForestError> {
    params.validate()?;
    if matrix.is_empty() || matrix.len() < params.min_samples_split {
        return Err(ForestError::InsufficientData(format!(
            "{} rows, min_samples_split {}",
            matrix.len(),
            params.min_samples_split
        )));
    }
    let label_set = matrix.users();
    if label_set.len() < 2 {
        return Err(ForestError::SingleClass(label_set.into_iter().next().unwrap_or_default()));
    }
    let data = Samples::from_matrix(matrix, &label_set)?;
    Forest::fit(&data, label_set, matrix.column_names(), params)
}
