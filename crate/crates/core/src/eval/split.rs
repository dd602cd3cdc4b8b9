//! Per-session train/test splits and stratified k-fold partitions.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::featurize::FeatureMatrix;
use crate::ingest::SessionMeta;
use crate::seed;

/// Where the test frames of a session come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestBlock {
    /// One contiguous block at the end of the session.
    Tail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub test_block: TestBlock,
    /// Training frames dropped just before the test block. With 50% overlap,
    /// `gap = 1` removes the one frame that shares samples with the test block.
    pub gap: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8, test_block: TestBlock::Tail, gap: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(EvalError::InvalidArgument(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Splits frames `0..n_frames` of one session. The test block is the last
/// `round(n_frames * (1 - train_fraction))` frames (at least one, and at
/// least one frame is left for training).
pub fn split_session_frames(n_frames: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    spec.validate()?;
    if n_frames < 2 {
        return Err(EvalError::TooFewFrames(n_frames));
    }
    let n_test = ((n_frames as f64 * (1.0 - spec.train_fraction)).round() as usize).clamp(1, n_frames - 1);
    let test_start = n_frames - n_test;
    if test_start <= spec.gap {
        return Err(EvalError::InvalidArgument(format!(
            "gap {} leaves no training frames out of {}",
            spec.gap, n_frames
        )));
    }
    let train = (0..test_start - spec.gap).collect();
    let test = (test_start..n_frames).collect();
    Ok((train, test))
}

/// Applies [`split_session_frames`] to every session in `matrix`. Rows keep
/// their relative order.
pub fn split_matrix(matrix: &FeatureMatrix, spec: &SplitSpec) -> Result<(FeatureMatrix, FeatureMatrix), EvalError> {
    let mut sessions: BTreeMap<&SessionMeta, Vec<usize>> = BTreeMap::new();
    for (i, row) in matrix.rows.iter().enumerate() {
        sessions.entry(&row.origin.session).or_default().push(i);
    }
    let mut role = vec![None; matrix.len()];
    for rows in sessions.values_mut() {
        rows.sort_by_key(|&i| matrix.rows[i].origin.frame_index);
        let (train, test) = split_session_frames(rows.len(), spec)?;
        for k in train {
            role[rows[k]] = Some(true);
        }
        for k in test {
            role[rows[k]] = Some(false);
        }
    }
    let pick = |want: bool| -> Vec<usize> { (0..matrix.len()).filter(|&i| role[i] == Some(want)).collect() };
    Ok((matrix.subset(&pick(true)), matrix.subset(&pick(false))))
}

/// Row indices of one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified k-fold partition. Rows are grouped by user, shuffled within the
/// group, and dealt round-robin over the folds with one running counter, so
/// fold sizes differ by at most one overall and per user.
pub fn kfold(matrix: &FeatureMatrix, k: usize, seed: u64) -> Result<Vec<Fold>, EvalError> {
    if k < 2 || matrix.len() < k {
        return Err(EvalError::TooFewRows { rows: matrix.len(), k });
    }
    let mut by_user: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, label) in matrix.labels().enumerate() {
        by_user.entry(label).or_default().push(i);
    }
    let mut rng = seed::rng(seed);
    let mut fold_of = vec![0usize; matrix.len()];
    let mut counter = 0;
    for rows in by_user.values_mut() {
        rows.shuffle(&mut rng);
        for &r in rows.iter() {
            fold_of[r] = counter % k;
            counter += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (validation, train) = (0..matrix.len()).partition(|&i| fold_of[i] == f);
            Fold { train, validation }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::{FeatureId, FeatureVector, FrameOrigin};
    use crate::signal::Condition;

    #[test]
    fn fourteen_frames_split_eleven_three() {
        let (train, test) = split_session_frames(14, &SplitSpec::default()).unwrap();
        assert_eq!(train, (0..11).collect::<Vec<_>>());
        assert_eq!(test, vec![11, 12, 13]);
    }

    #[test]
    fn minimum_sizes() {
        let (train, test) = split_session_frames(2, &SplitSpec::default()).unwrap();
        assert_eq!((train, test), (vec![0], vec![1]));
        assert!(matches!(split_session_frames(1, &SplitSpec::default()), Err(EvalError::TooFewFrames(1))));
        let bad = SplitSpec { train_fraction: 1.0, ..SplitSpec::default() };
        assert!(split_session_frames(14, &bad).is_err());
    }

    #[test]
    fn gap_drops_boundary_frame() {
        let spec = SplitSpec { gap: 1, ..SplitSpec::default() };
        let (train, test) = split_session_frames(14, &spec).unwrap();
        assert_eq!(train, (0..10).collect::<Vec<_>>());
        assert_eq!(test, vec![11, 12, 13]);
        assert!(split_session_frames(2, &spec).is_err());
    }

    fn matrix(sizes: &[(usize, usize)]) -> FeatureMatrix {
        // (user rows, sessions) pairs; frames within each session
        let mut rows = Vec::new();
        for (u, &(n, sessions)) in sizes.iter().enumerate() {
            for s in 0..sessions {
                for f in 0..n {
                    rows.push(FeatureVector {
                        values: vec![u as f64],
                        origin: FrameOrigin {
                            session: SessionMeta::new(format!("u{u}"), Condition::SameSong, s as u32 + 1),
                            frame_index: f,
                        },
                    });
                }
            }
        }
        FeatureMatrix { columns: vec![FeatureId::from_index(0)], rows }
    }

    #[test]
    fn table_two_totals() {
        let mut shape = vec![(14, 5); 5];
        shape.push((14, 4));
        shape.extend([(14, 3); 5]);
        shape.extend([(14, 2); 9]);
        let m = matrix(&shape);
        let (train, test) = split_matrix(&m, &SplitSpec::default()).unwrap();
        assert_eq!((train.len(), test.len()), (682, 186));
    }

    #[test]
    fn kfold_sizes_and_partition() {
        // 682 rows from 20 users with uneven counts
        let mut shape = vec![(55, 1); 5];
        shape.push((44, 1));
        shape.extend([(33, 1); 5]);
        shape.extend([(22, 1); 9]);
        let m = matrix(&shape);
        assert_eq!(m.len(), 682);
        let folds = kfold(&m, 10, 3).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(|f| f.validation.len()).collect();
        sizes.sort();
        assert_eq!(sizes, [vec![68; 8], vec![69; 2]].concat());
        let mut seen = vec![0; m.len()];
        for f in &folds {
            assert_eq!(f.train.len() + f.validation.len(), m.len());
            for &i in &f.validation {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        // per-user counts within one
        for user in m.users() {
            let counts: Vec<usize> = folds
                .iter()
                .map(|f| f.validation.iter().filter(|&&i| m.rows[i].origin.user_id() == user).count())
                .collect();
            assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
        assert_eq!(kfold(&m, 10, 3).unwrap(), folds);
    }

    #[test]
    fn leave_one_out_and_errors() {
        let m = matrix(&[(3, 1), (2, 1)]);
        let folds = kfold(&m, 5, 0).unwrap();
        assert!(folds.iter().all(|f| f.validation.len() == 1));
        assert!(matches!(kfold(&m, 6, 0), Err(EvalError::TooFewRows { rows: 5, k: 6 })));
        assert!(kfold(&m, 1, 0).is_err());
    }
}
