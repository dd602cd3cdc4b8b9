//! Identification and verification scoring, threshold sweeps and k-fold CV.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{kfold, EvalError};
use crate::featurize::{FeatureMatrix, FeatureSelection};
use crate::forest::{train_forest, train_ovr, Forest, ForestParams, OvrModel};
use crate::seed;
use crate::signal::Condition;

/// Confusion-matrix axis labels of a verification report: truth on rows,
/// decision on columns (accept = genuine, reject = impostor).
pub const GENUINE: &str = "genuine";
pub const IMPOSTOR: &str = "impostor";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Identification,
    Verification,
}

/// Settings that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub params: ForestParams,
    pub n_features: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<FeatureSelection>,
    pub train_conditions: Vec<Condition>,
    pub test_conditions: Vec<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserScore {
    pub user: String,
    /// Test frames of this user (identification) or claims naming this user
    /// (verification).
    pub n: u64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genuine_accept_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impostor_reject_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub accuracy: f64,
    /// Scored decisions: frames for identification, (frame, claim) pairs for
    /// verification.
    pub n_test: u64,
    pub labels: Vec<String>,
    /// `confusion[truth][predicted]`, indexed like `labels`.
    pub confusion: Vec<Vec<u64>>,
    pub per_user: Vec<UserScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importances: Option<Vec<(String, f64)>>,
    pub config: ConfigEcho,
}

impl EvalReport {
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("truth\\predicted");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.confusion) {
            out.push_str(l);
            for c in row {
                out.push(',');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn user(&self, user: &str) -> Option<&UserScore> {
        self.per_user.iter().find(|u| u.user == user)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn conditions(m: &FeatureMatrix) -> Vec<Condition> {
    m.conditions().into_iter().collect()
}

fn check_labels(enrolled: &[String], test: &FeatureMatrix) -> Result<(), EvalError> {
    let known: BTreeSet<&str> = enrolled.iter().map(String::as_str).collect();
    match test.labels().find(|l| !known.contains(l)) {
        Some(l) => Err(EvalError::UnseenLabel(l.to_string())),
        None => Ok(()),
    }
}

/// Scores a trained identification forest on `test`.
pub fn score_identification(forest: &Forest, test: &FeatureMatrix) -> Result<EvalReport, EvalError> {
    check_labels(&forest.label_set, test)?;
    let predictions = forest.predict_matrix(test)?;
    let k = forest.label_set.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (row, p) in test.rows.iter().zip(&predictions) {
        let truth = forest.class_of(row.origin.user_id()).expect("checked above");
        confusion[truth][p.class] += 1;
    }
    let n_test = test.len() as u64;
    let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
    let per_user = forest
        .label_set
        .iter()
        .enumerate()
        .filter_map(|(i, user)| {
            let n: u64 = confusion[i].iter().sum();
            (n > 0).then(|| UserScore {
                user: user.clone(),
                n,
                accuracy: ratio(confusion[i][i], n),
                genuine_accept_rate: None,
                impostor_reject_rate: None,
            })
        })
        .collect();
    Ok(EvalReport {
        task: Task::Identification,
        accuracy: ratio(trace, n_test),
        n_test,
        labels: forest.label_set.clone(),
        confusion,
        per_user,
        importances: Some(forest.ranked_importance()),
        config: ConfigEcho {
            params: forest.params.clone(),
            n_features: forest.n_features(),
            selection: None,
            train_conditions: Vec::new(),
            test_conditions: conditions(test),
            threshold: None,
        },
    })
}

/// Trains a forest on `train` and scores it on `test`.
pub fn evaluate_identification(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    params: &ForestParams,
) -> Result<EvalReport, EvalError> {
    check_labels(&train.users(), test)?;
    let forest = train_forest(train, params)?;
    let mut report = score_identification(&forest, test)?;
    report.config.train_conditions = conditions(train);
    Ok(report)
}

/// Positive-vote scores, `scores[frame][user]` with users in model order.
fn claim_scores(model: &OvrModel, test: &FeatureMatrix) -> Result<Vec<Vec<f64>>, EvalError> {
    for forest in model.models.values() {
        forest.check_columns(test)?;
    }
    let users: Vec<&str> = model.users().collect();
    test.rows
        .iter()
        .map(|r| users.iter().map(|u| model.score(&r.values, u).map_err(EvalError::from)).collect())
        .collect()
}

#[derive(Default, Clone, Copy)]
struct ClaimCounts {
    genuine: u64,
    genuine_accepted: u64,
    impostor: u64,
    impostor_rejected: u64,
}

fn tally(scores: &[Vec<f64>], truth: &[usize], threshold: f64, n_users: usize) -> Vec<ClaimCounts> {
    let mut counts = vec![ClaimCounts::default(); n_users];
    for (frame, &t) in scores.iter().zip(truth) {
        for (u, &s) in frame.iter().enumerate() {
            let accept = s >= threshold;
            let c = &mut counts[u];
            if u == t {
                c.genuine += 1;
                c.genuine_accepted += u64::from(accept);
            } else {
                c.impostor += 1;
                c.impostor_rejected += u64::from(!accept);
            }
        }
    }
    counts
}

fn truth_indices(model: &OvrModel, test: &FeatureMatrix) -> Result<Vec<usize>, EvalError> {
    let users: Vec<String> = model.users().map(str::to_string).collect();
    check_labels(&users, test)?;
    Ok(test.labels().map(|l| users.binary_search_by(|u| u.as_str().cmp(l)).expect("checked")).collect())
}

/// Scores every (test frame, enrolled user) claim against `model`.
pub fn score_verification(model: &OvrModel, test: &FeatureMatrix) -> Result<EvalReport, EvalError> {
    let truth = truth_indices(model, test)?;
    let scores = claim_scores(model, test)?;
    let users: Vec<&str> = model.users().collect();
    let counts = tally(&scores, &truth, model.threshold, users.len());
    let mut confusion = vec![vec![0u64; 2]; 2];
    let per_user = users
        .iter()
        .zip(&counts)
        .map(|(user, c)| {
            confusion[0][0] += c.genuine_accepted;
            confusion[0][1] += c.genuine - c.genuine_accepted;
            confusion[1][0] += c.impostor - c.impostor_rejected;
            confusion[1][1] += c.impostor_rejected;
            UserScore {
                user: user.to_string(),
                n: c.genuine + c.impostor,
                accuracy: ratio(c.genuine_accepted + c.impostor_rejected, c.genuine + c.impostor),
                genuine_accept_rate: (c.genuine > 0).then(|| ratio(c.genuine_accepted, c.genuine)),
                impostor_reject_rate: (c.impostor > 0).then(|| ratio(c.impostor_rejected, c.impostor)),
            }
        })
        .collect();
    let n_test: u64 = confusion.iter().flatten().sum();
    let first = model.models.values().next();
    Ok(EvalReport {
        task: Task::Verification,
        accuracy: ratio(confusion[0][0] + confusion[1][1], n_test),
        n_test,
        labels: vec![GENUINE.to_string(), IMPOSTOR.to_string()],
        confusion,
        per_user,
        importances: None,
        config: ConfigEcho {
            params: first.map(|f| f.params.clone()).unwrap_or_default(),
            n_features: model.feature_names().len(),
            selection: None,
            train_conditions: Vec::new(),
            test_conditions: conditions(test),
            threshold: Some(model.threshold),
        },
    })
}

/// Trains one-vs-rest models on `train` and scores all claims on `test`.
pub fn evaluate_verification(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    params: &ForestParams,
    threshold: f64,
) -> Result<EvalReport, EvalError> {
    check_labels(&train.users(), test)?;
    let model = train_ovr(train, params, threshold)?;
    let mut report = score_verification(&model, test)?;
    report.config.train_conditions = conditions(train);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub genuine_accept_rate: f64,
    pub impostor_reject_rate: f64,
    pub accuracy: f64,
}

/// Pooled verification rates of `model` on `test` at each threshold. The
/// model's own threshold is ignored.
pub fn threshold_sweep(model: &OvrModel, test: &FeatureMatrix, thresholds: &[f64]) -> Result<Vec<SweepPoint>, EvalError> {
    let truth = truth_indices(model, test)?;
    let scores = claim_scores(model, test)?;
    let n_users = model.models.len();
    thresholds
        .iter()
        .map(|&t| {
            if !(t > 0.0 && t < 1.0) {
                return Err(EvalError::Forest(crate::forest::ForestError::InvalidThreshold(t)));
            }
            let c = tally(&scores, &truth, t, n_users).into_iter().fold(ClaimCounts::default(), |a, c| ClaimCounts {
                genuine: a.genuine + c.genuine,
                genuine_accepted: a.genuine_accepted + c.genuine_accepted,
                impostor: a.impostor + c.impostor,
                impostor_rejected: a.impostor_rejected + c.impostor_rejected,
            });
            Ok(SweepPoint {
                threshold: t,
                genuine_accept_rate: ratio(c.genuine_accepted, c.genuine),
                impostor_reject_rate: ratio(c.impostor_rejected, c.impostor),
                accuracy: ratio(c.genuine_accepted + c.impostor_rejected, c.genuine + c.impostor),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// Stratified k-fold identification accuracy. Fold `i` trains with seed
/// `derive(params.seed, i)`.
pub fn cross_validate(matrix: &FeatureMatrix, k: usize, params: &ForestParams, seed: u64) -> Result<CvReport, EvalError> {
    let folds = kfold(matrix, k, seed)?;
    let mut fold_accuracies = Vec::with_capacity(k);
    for (i, fold) in folds.iter().enumerate() {
        let train = matrix.subset(&fold.train);
        let validation = matrix.subset(&fold.validation);
        let fold_params = ForestParams { seed: seed::derive(params.seed, i as u64), ..params.clone() };
        let forest = train_forest(&train, &fold_params)?;
        // a user may be missing from a tiny training fold; count those frames as errors
        let predictions = forest.predict_matrix(&validation)?;
        let correct = validation
            .rows
            .iter()
            .zip(&predictions)
            .filter(|(r, p)| forest.label(p.class) == r.origin.user_id())
            .count();
        fold_accuracies.push(ratio(correct as u64, validation.len() as u64));
    }
    let mean = fold_accuracies.iter().sum::<f64>() / k as f64;
    let var = fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / k as f64;
    Ok(CvReport { k, fold_accuracies, mean_accuracy: mean, std_accuracy: var.sqrt() })
}
