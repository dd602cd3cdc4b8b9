//! Overlapping framing and per-frame statistics.
//!
//! Each frame of a [`ReducedSession`] becomes an 80-value [`FeatureVector`]:
//! mean, max, min and zero-crossing rate of the 20 retained series. Column
//! `((channel_rank * 5) + signal_rank) * 4 + stat_rank` holds
//! `"{stat}_{signal}_{channel}"`, e.g. `mean_Alpha_TP9`.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{drop_delta, Dataset, ReducedSession, SessionMeta};
use crate::signal::{
    reduced_slot, ChannelId, Condition, SignalKind, Stat, FEATURE_COUNT, REDUCED_WIDTH,
};

pub const DEFAULT_FRAME_LEN: usize = 40;
pub const DEFAULT_HOP: usize = 20;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("session has {samples} samples, fewer than the frame length {frame_len}")]
    SessionTooShort { samples: usize, frame_len: usize },
    #[error("invalid framing: frame_len={frame_len}, hop={hop} (need frame_len >= 2 and 1 <= hop <= frame_len)")]
    InvalidFraming { frame_len: usize, hop: usize },
    #[error("series of length {0} is too short for a zero-crossing rate")]
    SeriesTooShort(usize),
    #[error("feature selection is empty")]
    EmptySelection,
    #[error("unknown feature column '{0}'")]
    UnknownColumn(String),
    #[error("malformed feature table: {0}")]
    Malformed(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// A window of consecutive samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_index: usize,
    pub start: usize,
    pub length: usize,
    /// One series per reduced slot.
    pub values: Vec<Vec<f64>>,
}

/// Windows of `frame_len` samples every `hop` samples; a trailing partial
/// window is discarded.
pub fn make_frames(session: &ReducedSession, frame_len: usize, hop: usize) -> Result<Vec<Frame>, FeatureError> {
    let n = session.sample_count();
    let count = frame_count(n, frame_len, hop)?;
    Ok((0..count)
        .map(|frame_index| {
            let start = frame_index * hop;
            let window = &session.samples[start..start + frame_len];
            let values = (0..REDUCED_WIDTH)
                .map(|slot| window.iter().map(|s| s[slot]).collect())
                .collect();
            Frame { frame_index, start, length: frame_len, values }
        })
        .collect())
}

/// `floor((n - frame_len) / hop) + 1`, after checking preconditions.
pub fn frame_count(n: usize, frame_len: usize, hop: usize) -> Result<usize, FeatureError> {
    if frame_len < 2 || hop == 0 || hop > frame_len {
        return Err(FeatureError::InvalidFraming { frame_len, hop });
    }
    if n < frame_len {
        return Err(FeatureError::SessionTooShort { samples: n, frame_len });
    }
    Ok((n - frame_len) / hop + 1)
}

/// Fraction of adjacent pairs whose signs differ, with sign(0) = +1.
pub fn zcr(series: &[f64]) -> Result<f64, FeatureError> {
    if series.len() < 2 {
        return Err(FeatureError::SeriesTooShort(series.len()));
    }
    let crossings = series
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    Ok(crossings as f64 / (series.len() - 1) as f64)
}

/// Identifies one feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureId {
    pub channel: ChannelId,
    pub signal: SignalKind,
    pub stat: Stat,
}

impl FeatureId {
    pub fn new(channel: ChannelId, signal: SignalKind, stat: Stat) -> Self {
        debug_assert!(signal != SignalKind::Delta);
        FeatureId { channel, signal, stat }
    }

    /// Position in the full 80-column vector.
    pub fn index(self) -> usize {
        let signal_rank = self.signal.retained_rank().expect("Delta has no feature columns");
        ((self.channel.rank() * SignalKind::RETAINED.len()) + signal_rank) * Stat::ALL.len() + self.stat.rank()
    }

    pub fn from_index(idx: usize) -> Self {
        assert!(idx < FEATURE_COUNT, "feature index {idx} out of range");
        let stats = Stat::ALL.len();
        let signals = SignalKind::RETAINED.len();
        FeatureId {
            channel: ChannelId::ALL[idx / (stats * signals)],
            signal: SignalKind::RETAINED[(idx / stats) % signals],
            stat: Stat::ALL[idx % stats],
        }
    }

    /// All 80 columns in canonical order.
    pub fn all() -> Vec<FeatureId> {
        (0..FEATURE_COUNT).map(FeatureId::from_index).collect()
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}_{}", self.stat, self.signal, self.channel)
    }
}

impl FromStr for FeatureId {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FeatureError::UnknownColumn(s.to_string());
        let mut parts = s.split('_');
        let (Some(stat), Some(signal), Some(channel), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        let stat: Stat = stat.parse().map_err(|_| bad())?;
        let signal: SignalKind = signal.parse().map_err(|_| bad())?;
        let channel: ChannelId = channel.parse().map_err(|_| bad())?;
        if signal == SignalKind::Delta {
            return Err(bad());
        }
        Ok(FeatureId { channel, signal, stat })
    }
}

/// Where a feature row came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FrameOrigin {
    pub session: SessionMeta,
    pub frame_index: usize,
}

impl FrameOrigin {
    pub fn user_id(&self) -> &str {
        &self.session.user_id
    }

    pub fn condition(&self) -> Condition {
        self.session.condition
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub origin: FrameOrigin,
}

/// Statistics of one frame in canonical column order.
pub fn frame_stats(frame: &Frame, meta: &SessionMeta) -> Result<FeatureVector, FeatureError> {
    let mut values = vec![0.0; FEATURE_COUNT];
    for channel in ChannelId::ALL {
        for signal in SignalKind::RETAINED {
            let series = &frame.values[reduced_slot(signal, channel).unwrap()];
            let (min, max) = series
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            // the true mean lies in [min, max]; clamp away summation rounding
            let mean = (series.iter().sum::<f64>() / series.len() as f64).clamp(min, max);
            let at = |stat| FeatureId::new(channel, signal, stat).index();
            values[at(Stat::Mean)] = mean;
            values[at(Stat::Max)] = max;
            values[at(Stat::Min)] = min;
            values[at(Stat::Zcr)] = zcr(series)?;
        }
    }
    Ok(FeatureVector {
        values,
        origin: FrameOrigin { session: meta.clone(), frame_index: frame.frame_index },
    })
}

/// Rows of frame features with the columns they hold.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<FeatureId>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn empty() -> Self {
        FeatureMatrix { columns: FeatureId::all(), rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(ToString::to_string).collect()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.origin.user_id())
    }

    /// Distinct user ids, sorted.
    pub fn users(&self) -> Vec<String> {
        self.labels().map(str::to_string).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn conditions(&self) -> BTreeSet<Condition> {
        self.rows.iter().map(|r| r.origin.condition()).collect()
    }

    /// Rows satisfying `keep`, in order.
    pub fn filter(&self, mut keep: impl FnMut(&FrameOrigin) -> bool) -> FeatureMatrix {
        FeatureMatrix {
            columns: self.columns.clone(),
            rows: self.rows.iter().filter(|r| keep(&r.origin)).cloned().collect(),
        }
    }

    pub fn for_condition(&self, condition: Condition) -> FeatureMatrix {
        self.filter(|o| o.condition() == condition)
    }

    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Concatenates rows of matrices sharing the same columns.
    pub fn concat(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix, FeatureError> {
        let Some(first) = parts.first() else {
            return Ok(FeatureMatrix::empty());
        };
        if parts.iter().any(|p| p.columns != first.columns) {
            return Err(FeatureError::Malformed("cannot concatenate matrices with different columns".into()));
        }
        Ok(FeatureMatrix {
            columns: first.columns.clone(),
            rows: parts.iter().flat_map(|p| p.rows.iter().cloned()).collect(),
        })
    }

    /// Values of one column, by position.
    pub fn column(&self, position: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r.values[position])
    }

    /// Writes the matrix with feature columns followed by
    /// `user_id,condition,session,frame`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeatureError> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = self.column_names();
        header.extend(["user_id", "condition", "session", "frame"].map(String::from));
        writer.write_record(&header)?;
        for row in &self.rows {
            let mut record: Vec<String> = row.values.iter().map(f64::to_string).collect();
            record.push(row.origin.session.user_id.clone());
            record.push(row.origin.session.condition.to_string());
            record.push(row.origin.session.session_index.to_string());
            record.push(row.origin.frame_index.to_string());
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| FeatureError::Csv(e.into()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<FeatureMatrix, FeatureError> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        let n = headers.len();
        if n < 5 || headers.iter().skip(n - 4).ne(["user_id", "condition", "session", "frame"]) {
            return Err(FeatureError::Malformed(
                "last four columns must be user_id,condition,session,frame".into(),
            ));
        }
        let columns = headers
            .iter()
            .take(n - 4)
            .map(str::parse)
            .collect::<Result<Vec<FeatureId>, _>>()?;
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let bad = |what: &str| FeatureError::Malformed(format!("row {}: bad {what}", line + 1));
            let values = record
                .iter()
                .take(n - 4)
                .map(|c| c.parse::<f64>().map_err(|_| bad("value")))
                .collect::<Result<Vec<_>, _>>()?;
            let condition: Condition = record[n - 3].parse().map_err(|_| bad("condition"))?;
            let session_index: u32 = record[n - 2].parse().map_err(|_| bad("session"))?;
            let frame_index: usize = record[n - 1].parse().map_err(|_| bad("frame"))?;
            rows.push(FeatureVector {
                values,
                origin: FrameOrigin {
                    session: SessionMeta::new(&record[n - 4], condition, session_index),
                    frame_index,
                },
            });
        }
        Ok(FeatureMatrix { columns, rows })
    }
}

/// One feature row per frame, in frame order.
pub fn featurize_session(session: &ReducedSession, frame_len: usize, hop: usize) -> Result<FeatureMatrix, FeatureError> {
    let rows = make_frames(session, frame_len, hop)?
        .iter()
        .map(|f| frame_stats(f, &session.meta))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureMatrix { columns: FeatureId::all(), rows })
}

/// Featurizes every session (in parallel), rows ordered by
/// (user, condition, session, frame).
pub fn featurize_dataset(dataset: &Dataset, frame_len: usize, hop: usize) -> Result<FeatureMatrix, FeatureError> {
    let mut parts = dataset
        .sessions
        .par_iter()
        .map(|s| featurize_session(&drop_delta(s), frame_len, hop).map(|m| (s.meta.clone(), m)))
        .collect::<Result<Vec<_>, _>>()?;
    parts.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(FeatureMatrix {
        columns: FeatureId::all(),
        rows: parts.into_iter().flat_map(|(_, m)| m.rows).collect(),
    })
}

/// Which feature columns to keep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSelection {
    pub channels: BTreeSet<ChannelId>,
    pub signals: BTreeSet<SignalKind>,
    pub stats: BTreeSet<Stat>,
}

impl Default for FeatureSelection {
    fn default() -> Self {
        Self::all()
    }
}

impl FeatureSelection {
    pub fn all() -> Self {
        FeatureSelection {
            channels: ChannelId::ALL.into_iter().collect(),
            signals: SignalKind::RETAINED.into_iter().collect(),
            stats: Stat::ALL.into_iter().collect(),
        }
    }

    pub fn channels(channels: impl IntoIterator<Item = ChannelId>) -> Self {
        FeatureSelection { channels: channels.into_iter().collect(), ..Self::all() }
    }

    pub fn signals(signals: impl IntoIterator<Item = SignalKind>) -> Self {
        FeatureSelection { signals: signals.into_iter().collect(), ..Self::all() }
    }

    pub fn contains(&self, id: &FeatureId) -> bool {
        self.channels.contains(&id.channel) && self.signals.contains(&id.signal) && self.stats.contains(&id.stat)
    }

    pub fn is_all(&self) -> bool {
        *self == Self::all()
    }
}

/// Keeps the columns whose channel, signal and statistic are all selected.
pub fn select_features(matrix: &FeatureMatrix, selection: &FeatureSelection) -> Result<FeatureMatrix, FeatureError> {
    if selection.channels.is_empty() || selection.signals.is_empty() || selection.stats.is_empty() {
        return Err(FeatureError::EmptySelection);
    }
    let keep: Vec<usize> = (0..matrix.columns.len())
        .filter(|&i| selection.contains(&matrix.columns[i]))
        .collect();
    if keep.is_empty() {
        return Err(FeatureError::EmptySelection);
    }
    Ok(FeatureMatrix {
        columns: keep.iter().map(|&i| matrix.columns[i]).collect(),
        rows: matrix
            .rows
            .iter()
            .map(|r| FeatureVector {
                values: keep.iter().map(|&i| r.values[i]).collect(),
                origin: r.origin.clone(),
            })
            .collect(),
    })
}
