//! Electrode and band ablations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::percent;
use super::{evaluate_identification, evaluate_verification, split_matrix, EvalError, EvalReport, SplitSpec, Table};
use crate::featurize::{select_features, FeatureMatrix, FeatureSelection};
use crate::forest::ForestParams;
use crate::signal::{ChannelId, Condition, SignalKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    Electrode,
    Band,
}

impl AblationAxis {
    pub fn title(self) -> &'static str {
        match self {
            AblationAxis::Electrode => "Electrode position",
            AblationAxis::Band => "Brainwave type",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSubset {
    pub name: String,
    pub selection: FeatureSelection,
}

impl AblationSubset {
    /// The unablated feature set.
    pub fn all() -> Self {
        AblationSubset { name: "All".into(), selection: FeatureSelection::all() }
    }

    fn channels(list: &[ChannelId]) -> Self {
        let name = list.iter().map(|c| c.name()).collect::<Vec<_>>().join("+");
        AblationSubset { name, selection: FeatureSelection::channels(list.iter().copied()) }
    }

    fn signals(list: &[SignalKind]) -> Self {
        let name = list.iter().map(|s| s.name()).collect::<Vec<_>>().join("+");
        AblationSubset { name, selection: FeatureSelection::signals(list.iter().copied()) }
    }
}

/// Two electrode pairs followed by each single electrode.
pub fn electrode_subsets() -> Vec<AblationSubset> {
    use ChannelId::*;
    [&[Af7, Af8][..], &[Tp9, Tp10], &[Tp9], &[Af7], &[Af8], &[Tp10]]
        .into_iter()
        .map(AblationSubset::channels)
        .collect()
}

/// Single bands, then adjacent band pairs. The raw channel is left out.
pub fn band_subsets() -> Vec<AblationSubset> {
    use SignalKind::*;
    [&[Alpha][..], &[Beta], &[Gamma], &[Theta], &[Alpha, Beta], &[Beta, Gamma], &[Gamma, Theta]]
        .into_iter()
        .map(AblationSubset::signals)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub axis: AblationAxis,
    pub subset: String,
    pub condition: Condition,
    pub identification: EvalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<EvalReport>,
}

/// Evaluates every subset on every condition present in `matrix`. The split
/// is applied per condition before column selection. Verification runs only
/// when `threshold` is given.
pub fn ablate(
    matrix: &FeatureMatrix,
    axis: AblationAxis,
    subsets: &[AblationSubset],
    spec: &SplitSpec,
    params: &ForestParams,
    threshold: Option<f64>,
) -> Result<Vec<AblationRow>, EvalError> {
    let splits = matrix
        .conditions()
        .into_iter()
        .map(|c| split_matrix(&matrix.for_condition(c), spec).map(|s| (c, s)))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(&AblationSubset, usize)> =
        subsets.iter().flat_map(|s| (0..splits.len()).map(move |c| (s, c))).collect();
    jobs.par_iter()
        .map(|&(subset, c)| {
            let (condition, (train, test)) = &splits[c];
            let train = select_features(train, &subset.selection)?;
            let test = select_features(test, &subset.selection)?;
            let mut identification = evaluate_identification(&train, &test, params)?;
            identification.config.selection = Some(subset.selection.clone());
            let verification = threshold
                .map(|t| {
                    evaluate_verification(&train, &test, params, t).map(|mut r| {
                        r.config.selection = Some(subset.selection.clone());
                        r
                    })
                })
                .transpose()?;
            Ok(AblationRow { axis, subset: subset.name.clone(), condition: *condition, identification, verification })
        })
        .collect()
}

/// One row per (axis, subset) with identification and verification accuracy
/// for each condition; missing cells read "absent".
pub fn ablation_table(rows: &[AblationRow]) -> Table {
    let mut t = Table::new(
        "Summary of results",
        &[
            "block",
            "subset",
            "same_song_identification",
            "same_song_verification",
            "favorite_song_identification",
            "favorite_song_verification",
        ],
    );
    let mut keys: Vec<(AblationAxis, &str)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.axis, r.subset.as_str())) {
            keys.push((r.axis, r.subset.as_str()));
        }
    }
    for (axis, subset) in keys {
        let mut cells = vec![axis.title().to_string(), subset.to_string()];
        for condition in Condition::ALL {
            let hit = rows.iter().find(|r| r.axis == axis && r.subset == subset && r.condition == condition);
            cells.push(hit.map_or("absent".into(), |r| percent(r.identification.accuracy)));
            cells.push(
                hit.and_then(|r| r.verification.as_ref())
                    .map_or("absent".into(), |v| percent(v.accuracy)),
            );
        }
        t.push(cells);
    }
    t
}
