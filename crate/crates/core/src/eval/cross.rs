//! Training on one listening condition and testing on another.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::table::percent;
use super::{score_identification, split_matrix, EvalError, EvalReport, SplitSpec, Table};
use crate::featurize::FeatureMatrix;
use crate::forest::{train_forest, ForestParams};
use crate::signal::Condition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainSource {
    Condition(Condition),
    /// Union of both conditions' training splits.
    Combined,
}

impl TrainSource {
    pub const ALL: [TrainSource; 3] = [
        TrainSource::Condition(Condition::SameSong),
        TrainSource::Condition(Condition::FavoriteSong),
        TrainSource::Combined,
    ];

    fn conditions(self) -> Vec<Condition> {
        match self {
            TrainSource::Condition(c) => vec![c],
            TrainSource::Combined => Condition::ALL.to_vec(),
        }
    }
}

impl fmt::Display for TrainSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainSource::Condition(c) => write!(f, "{c}"),
            TrainSource::Combined => f.write_str("combined"),
        }
    }
}

fn require_conditions(matrix: &FeatureMatrix, needed: &[Condition]) -> Result<(), EvalError> {
    let users = matrix.users();
    for &condition in needed {
        let present: BTreeSet<&str> =
            matrix.rows.iter().filter(|r| r.origin.condition() == condition).map(|r| r.origin.user_id()).collect();
        if let Some(user) = users.iter().find(|u| !present.contains(u.as_str())) {
            return Err(EvalError::MissingCondition { user: user.clone(), condition });
        }
    }
    Ok(())
}

fn train_part(matrix: &FeatureMatrix, source: TrainSource, spec: &SplitSpec) -> Result<FeatureMatrix, EvalError> {
    let parts = source
        .conditions()
        .into_iter()
        .map(|c| split_matrix(&matrix.for_condition(c), spec).map(|(train, _)| train))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureMatrix::concat(&parts.iter().collect::<Vec<_>>())?)
}

/// Trains on the training split of `source` and scores the test split of
/// `test`. Every user must have sessions in every condition involved.
pub fn cross_condition(
    matrix: &FeatureMatrix,
    source: TrainSource,
    test: Condition,
    spec: &SplitSpec,
    params: &ForestParams,
) -> Result<EvalReport, EvalError> {
    Ok(cross_condition_grid(matrix, &[source], &[test], spec, params)?.remove(0).report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCell {
    pub train: TrainSource,
    pub test: Condition,
    pub report: EvalReport,
}

/// Every (source, test) pair, training one forest per source.
pub fn cross_condition_grid(
    matrix: &FeatureMatrix,
    sources: &[TrainSource],
    tests: &[Condition],
    spec: &SplitSpec,
    params: &ForestParams,
) -> Result<Vec<CrossCell>, EvalError> {
    let mut needed: BTreeSet<Condition> = tests.iter().copied().collect();
    needed.extend(sources.iter().flat_map(|s| s.conditions()));
    require_conditions(matrix, &needed.into_iter().collect::<Vec<_>>())?;
    let test_parts = tests
        .iter()
        .map(|&c| split_matrix(&matrix.for_condition(c), spec).map(|(_, t)| t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cells = Vec::new();
    for &source in sources {
        let train = train_part(matrix, source, spec)?;
        let forest = train_forest(&train, params)?;
        for (&test, part) in tests.iter().zip(&test_parts) {
            let mut report = score_identification(&forest, part)?;
            report.config.train_conditions = source.conditions();
            cells.push(CrossCell { train: source, test, report });
        }
    }
    Ok(cells)
}

/// Train sources as rows, test conditions as columns.
pub fn cross_condition_table(cells: &[CrossCell]) -> Table {
    let mut t = Table::new("Cross-condition identification accuracy", &["train", "test_same_song", "test_favorite_song"]);
    for source in TrainSource::ALL {
        if !cells.iter().any(|c| c.train == source) {
            continue;
        }
        let mut row = vec![source.to_string()];
        for test in Condition::ALL {
            let hit = cells.iter().find(|c| c.train == source && c.test == test);
            row.push(hit.map_or("absent".into(), |c| percent(c.report.accuracy)));
        }
        t.push(row);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::{FeatureId, FeatureVector, FrameOrigin};
    use crate::ingest::SessionMeta;

    fn matrix(favorite_shift: f64, skip_favorite_for: Option<usize>) -> FeatureMatrix {
        let mut rows = Vec::new();
        for u in 0..3 {
            for condition in Condition::ALL {
                if condition == Condition::FavoriteSong && skip_favorite_for == Some(u) {
                    continue;
                }
                let shift = if condition == Condition::FavoriteSong { favorite_shift } else { 0.0 };
                for f in 0..14 {
                    let j = ((f * 5) % 7) as f64 / 7.0;
                    rows.push(FeatureVector {
                        values: vec![u as f64 * 3.0 + j + shift, j],
                        origin: FrameOrigin { session: SessionMeta::new(format!("u{u}"), condition, 1), frame_index: f },
                    });
                }
            }
        }
        FeatureMatrix { columns: FeatureId::all()[..2].to_vec(), rows }
    }

    fn params() -> ForestParams {
        ForestParams::default().with_trees(15).with_seed(2)
    }

    #[test]
    fn within_condition_matches_standard_evaluation() {
        let m = matrix(0.0, None);
        let cell = cross_condition(&m, TrainSource::Condition(Condition::SameSong), Condition::SameSong, &SplitSpec::default(), &params())
            .unwrap();
        let (train, test) = split_matrix(&m.for_condition(Condition::SameSong), &SplitSpec::default()).unwrap();
        let direct = super::super::evaluate_identification(&train, &test, &params()).unwrap();
        assert_eq!(cell, direct);
    }

    #[test]
    fn shift_hurts_transfer_and_combined_gives_two_entries() {
        let m = matrix(1.5, None);
        let cells = cross_condition_grid(&m, &TrainSource::ALL, &Condition::ALL, &SplitSpec::default(), &params()).unwrap();
        assert_eq!(cells.len(), 6);
        let acc = |s, t| cells.iter().find(|c| c.train == s && c.test == t).unwrap().report.accuracy;
        let same = TrainSource::Condition(Condition::SameSong);
        assert!(acc(same, Condition::FavoriteSong) < acc(same, Condition::SameSong));
        let table = cross_condition_table(&cells);
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.rows[2][0], "combined");
    }

    #[test]
    fn missing_condition() {
        let m = matrix(0.0, Some(1));
        let err = cross_condition(&m, TrainSource::Combined, Condition::SameSong, &SplitSpec::default(), &params());
        assert!(matches!(err, Err(EvalError::MissingCondition { ref user, condition: Condition::FavoriteSong }) if user == "u1"));
    }
}
