//! One-way ANOVA of feature values grouped by user.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{f_pvalue, EvalError};
use crate::featurize::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_statistic: f64,
    pub df_between: u64,
    pub df_within: u64,
    pub p_value: f64,
}

struct SumsOfSquares {
    between: f64,
    within: f64,
    /// Squared magnitude scale used to decide when a sum is numerically zero.
    scale: f64,
    df_between: u64,
    df_within: u64,
}

fn sums_of_squares(groups: &[Vec<f64>]) -> Result<SumsOfSquares, EvalError> {
    if groups.len() < 2 {
        return Err(EvalError::DegenerateGroups(format!("{} group(s), need at least 2", groups.len())));
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(EvalError::DegenerateGroups(format!("group {i} is empty")));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    if n <= groups.len() {
        return Err(EvalError::DegenerateGroups(format!("{n} values in {} groups", groups.len())));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(EvalError::InvalidArgument("non-finite value".into()));
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut between = 0.0;
    let mut within = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        between += g.len() as f64 * (mean - grand).powi(2);
        within += g.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    let max_abs = groups.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(SumsOfSquares {
        between,
        within,
        scale: (1e-12 * max_abs).powi(2) * n as f64,
        df_between: groups.len() as u64 - 1,
        df_within: (n - groups.len()) as u64,
    })
}

/// Classic one-way ANOVA. Fails with `ZeroWithinVariance` when every group is
/// constant.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult, EvalError> {
    let ss = sums_of_squares(groups)?;
    let ms_between = ss.between / ss.df_between as f64;
    if ss.within <= ss.scale {
        return Err(EvalError::ZeroWithinVariance { ms_between });
    }
    let f = ms_between / (ss.within / ss.df_within as f64);
    Ok(AnovaResult {
        f_statistic: f,
        df_between: ss.df_between,
        df_within: ss.df_within,
        p_value: f_pvalue(f, ss.df_between, ss.df_within)?,
    })
}

/// One ANOVA outcome in a report. With zero within-group variance the F
/// statistic is undefined; `p_value` is then 0 when the group means differ
/// and absent when everything is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaEntry {
    pub name: String,
    pub f_statistic: Option<f64>,
    pub df_between: u64,
    pub df_within: u64,
    pub p_value: Option<f64>,
    pub zero_within_variance: bool,
}

impl AnovaEntry {
    fn from_groups(name: String, groups: &[Vec<f64>]) -> Result<AnovaEntry, EvalError> {
        let ss = sums_of_squares(groups)?;
        match anova_oneway(groups) {
            Ok(r) => Ok(AnovaEntry {
                name,
                f_statistic: Some(r.f_statistic),
                df_between: r.df_between,
                df_within: r.df_within,
                p_value: Some(r.p_value),
                zero_within_variance: false,
            }),
            Err(EvalError::ZeroWithinVariance { .. }) => Ok(AnovaEntry {
                name,
                f_statistic: None,
                df_between: ss.df_between,
                df_within: ss.df_within,
                p_value: (ss.between > ss.scale).then_some(0.0),
                zero_within_variance: true,
            }),
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaReport {
    pub n_rows: usize,
    pub n_groups: usize,
    /// Every (row, feature) value as one observation, grouped by user.
    pub pooled: AnovaEntry,
    pub per_feature: Vec<AnovaEntry>,
}

/// Per-feature F-tests plus the pooled test, with users as groups.
pub fn anova_f(matrix: &FeatureMatrix) -> Result<AnovaReport, EvalError> {
    let mut by_user: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, label) in matrix.labels().enumerate() {
        by_user.entry(label).or_default().push(i);
    }
    let groups_for = |cols: &[usize]| -> Vec<Vec<f64>> {
        by_user
            .values()
            .map(|rows| rows.iter().flat_map(|&r| cols.iter().map(move |&c| matrix.rows[r].values[c])).collect())
            .collect()
    };
    let all: Vec<usize> = (0..matrix.n_features()).collect();
    let pooled = AnovaEntry::from_groups("pooled".into(), &groups_for(&all))?;
    let per_feature = matrix
        .column_names()
        .into_iter()
        .enumerate()
        .map(|(c, name)| AnovaEntry::from_groups(name, &groups_for(&[c])))
        .collect::<Result<_, _>>()?;
    Ok(AnovaReport { n_rows: matrix.len(), n_groups: by_user.len(), pooled, per_feature })
}
