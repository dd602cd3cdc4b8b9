//! Session files: parsing, validation, Delta removal and the on-disk dataset layout.
//!
//! A session file is a CSV with one header row. The canonical header is
//!
//! ```text
//! TimeStamp,Delta_TP9,Delta_AF7,Delta_AF8,Delta_TP10,Theta_TP9,...,Gamma_TP10,RAW_TP9,...,RAW_TP10
//! ```
//!
//! Extra columns are ignored and column names can be remapped with a
//! [`ColumnMapping`]. `TimeStamp` holds seconds, either as a number or as a
//! `YYYY-MM-DD HH:MM:SS[.fff]` wall-clock string. Rows with any blank or
//! non-numeric required cell are dropped whole and counted.
//!
//! Datasets live on disk as `<root>/<user_id>/<condition>/<session_index>.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{
    reduced_slot, sample_slot, ChannelId, Condition, SignalKind, REDUCED_WIDTH, SAMPLE_WIDTH,
};

/// Headset recording interval in seconds.
pub const NOMINAL_INTERVAL_S: f64 = 0.5;

/// Samples per listening task in the reference protocol (150 s at 0.5 s).
pub const NOMINAL_SESSION_SAMPLES: usize = 300;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("header is missing required column '{0}'")]
    MissingColumn(String),
    #[error("session has no valid rows ({dropped} dropped)")]
    EmptySession { dropped: usize },
    #[error("timestamps are not strictly increasing at data row {row} ({previous} then {current})")]
    NonMonotonicTime { row: usize, previous: f64, current: f64 },
    #[error("sample {row} has a non-finite value")]
    NonFinite { row: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unexpected dataset layout at {path}: {reason}")]
    Layout { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<IngestError>,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

/// Who recorded a session, under which stimulus, and which repetition it was.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SessionMeta {
    pub user_id: String,
    pub condition: Condition,
    pub session_index: u32,
}

impl SessionMeta {
    pub fn new(user_id: impl Into<String>, condition: Condition, session_index: u32) -> Self {
        SessionMeta { user_id: user_id.into(), condition, session_index }
    }
}

/// One recorded line: a timestamp plus the 24 (signal, channel) readings laid
/// out by [`sample_slot`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub timestamp: f64,
    pub values: [f64; SAMPLE_WIDTH],
}

impl Sample {
    pub fn get(&self, signal: SignalKind, channel: ChannelId) -> f64 {
        self.values[sample_slot(signal, channel)]
    }
}

/// A full recording task.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub meta: SessionMeta,
    pub recording_interval_s: f64,
    pub samples: Vec<Sample>,
}

impl Session {
    /// Builds a session, checking finiteness and strictly increasing timestamps.
    pub fn new(meta: SessionMeta, recording_interval_s: f64, samples: Vec<Sample>) -> Result<Self, IngestError> {
        if samples.is_empty() {
            return Err(IngestError::EmptySession { dropped: 0 });
        }
        for (row, s) in samples.iter().enumerate() {
            if !s.timestamp.is_finite() || s.values.iter().any(|v| !v.is_finite()) {
                return Err(IngestError::NonFinite { row });
            }
        }
        check_monotonic(&samples)?;
        Ok(Session { meta, recording_interval_s, samples })
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Time series of one (signal, channel) pair.
    pub fn series(&self, signal: SignalKind, channel: ChannelId) -> Vec<f64> {
        let slot = sample_slot(signal, channel);
        self.samples.iter().map(|s| s.values[slot]).collect()
    }
}

fn check_monotonic(samples: &[Sample]) -> Result<(), IngestError> {
    for (row, pair) in samples.windows(2).enumerate() {
        if pair[1].timestamp <= pair[0].timestamp {
            return Err(IngestError::NonMonotonicTime {
                row: row + 1,
                previous: pair[0].timestamp,
                current: pair[1].timestamp,
            });
        }
    }
    Ok(())
}

/// Session with the four Delta readings removed. Values are laid out by
/// [`reduced_slot`]: Theta, Alpha, Beta, Gamma, Raw, each over the four channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSession {
    /// Provenance of the source session.
    pub meta: SessionMeta,
    pub recording_interval_s: f64,
    pub timestamps: Vec<f64>,
    pub samples: Vec<[f64; REDUCED_WIDTH]>,
}

impl ReducedSession {
    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn series(&self, slot: usize) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(move |s| s[slot])
    }
}

/// Projects out the Delta band. Non-Delta values are copied bit for bit.
pub fn drop_delta(session: &Session) -> ReducedSession {
    let mut slots = [0usize; REDUCED_WIDTH];
    for signal in SignalKind::RETAINED {
        for channel in ChannelId::ALL {
            slots[reduced_slot(signal, channel).unwrap()] = sample_slot(signal, channel);
        }
    }
    let samples = session
        .samples
        .iter()
        .map(|s| std::array::from_fn(|i| s.values[slots[i]]))
        .collect();
    ReducedSession {
        meta: session.meta.clone(),
        recording_interval_s: session.recording_interval_s,
        timestamps: session.samples.iter().map(|s| s.timestamp).collect(),
        samples,
    }
}

/// Header names used to find the timestamp and the 24 signal columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub timestamp: String,
    /// Indexed by [`sample_slot`].
    pub signals: Vec<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self::canonical()
    }
}

impl ColumnMapping {
    pub const TIMESTAMP: &'static str = "TimeStamp";

    pub fn canonical() -> Self {
        let mut signals = vec![String::new(); SAMPLE_WIDTH];
        for signal in SignalKind::ALL {
            for channel in ChannelId::ALL {
                signals[sample_slot(signal, channel)] = canonical_column(signal, channel);
            }
        }
        ColumnMapping { timestamp: Self::TIMESTAMP.to_string(), signals }
    }

    /// Canonical mapping with some columns renamed. Keys are canonical names
    /// (`TimeStamp`, `Alpha_AF7`, `RAW_TP9`, ...), values the header to read instead.
    pub fn with_overrides<'a>(
        overrides: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, IngestError> {
        let mut mapping = Self::canonical();
        let canonical = Self::canonical();
        for (key, header) in overrides {
            if key == Self::TIMESTAMP {
                mapping.timestamp = header.to_string();
            } else if let Some(slot) = canonical.signals.iter().position(|c| c == key) {
                mapping.signals[slot] = header.to_string();
            } else {
                return Err(IngestError::MissingColumn(format!("{key} (unknown canonical column in mapping)")));
            }
        }
        Ok(mapping)
    }
}

/// Canonical CSV column name; the raw channel is spelled `RAW`.
pub fn canonical_column(signal: SignalKind, channel: ChannelId) -> String {
    match signal {
        SignalKind::Raw => format!("RAW_{}", channel.name()),
        other => format!("{}_{}", other.name(), channel.name()),
    }
}

/// Result of [`parse_session`].
#[derive(Debug, Clone)]
pub struct ParsedSession {
    pub session: Session,
    /// Rows dropped for blank or non-numeric required cells.
    pub dropped: usize,
}

fn parse_timestamp(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    if let Ok(v) = cell.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(cell, fmt).ok())
        .map(|t| {
            let utc = t.and_utc();
            utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9
        })
}

fn parse_value(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn median_interval(samples: &[Sample]) -> f64 {
    if samples.len() < 2 {
        return NOMINAL_INTERVAL_S;
    }
    let mut gaps: Vec<f64> = samples.windows(2).map(|w| w[1].timestamp - w[0].timestamp).collect();
    gaps.sort_by(f64::total_cmp);
    gaps[gaps.len() / 2]
}

/// Parses one session file.
pub fn parse_session<R: Read>(
    input: R,
    meta: SessionMeta,
    mapping: &ColumnMapping,
) -> Result<ParsedSession, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::Headers)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let ts_col = find(&mapping.timestamp)?;
    let mut cols = [0usize; SAMPLE_WIDTH];
    for (slot, name) in mapping.signals.iter().enumerate() {
        cols[slot] = find(name)?;
    }

    let mut samples = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = record?;
        let timestamp = record.get(ts_col).and_then(parse_timestamp);
        let mut values = [0.0; SAMPLE_WIDTH];
        let mut complete = timestamp.is_some();
        for (slot, &col) in cols.iter().enumerate() {
            match record.get(col).and_then(parse_value) {
                Some(v) => values[slot] = v,
                None => {
                    complete = false;
                    break;
                }
            }
        }
        match (complete, timestamp) {
            (true, Some(timestamp)) => samples.push(Sample { timestamp, values }),
            _ => dropped += 1,
        }
    }
    if samples.is_empty() {
        return Err(IngestError::EmptySession { dropped });
    }
    check_monotonic(&samples)?;
    let recording_interval_s = median_interval(&samples);
    Ok(ParsedSession { session: Session { meta, recording_interval_s, samples }, dropped })
}

/// Writes a session in the canonical CSV layout. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_session_csv<W: Write>(session: &Session, out: W) -> Result<(), IngestError> {
    let mapping = ColumnMapping::canonical();
    let mut writer = csv::Writer::from_writer(out);
    writer.write_field(&mapping.timestamp)?;
    writer.write_record(&mapping.signals)?;
    let mut row: Vec<String> = Vec::with_capacity(SAMPLE_WIDTH + 1);
    for sample in &session.samples {
        row.clear();
        row.push(sample.timestamp.to_string());
        row.extend(sample.values.iter().map(f64::to_string));
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

/// Location of one problem found by [`validate_session`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRef {
    pub row: usize,
    pub signal: SignalKind,
    pub channel: ChannelId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimestampAnomaly {
    NonFinite { row: usize },
    NotIncreasing { row: usize, previous: f64, current: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub expected_samples: usize,
    pub sample_count: usize,
    pub count_mismatch: bool,
    pub non_finite: Vec<CellRef>,
    pub timestamp_anomalies: Vec<TimestampAnomaly>,
}

/// Inspects a session without modifying it.
pub fn validate_session(session: &Session, expected_samples: usize) -> ValidationReport {
    let mut non_finite = Vec::new();
    let mut timestamp_anomalies = Vec::new();
    for (row, sample) in session.samples.iter().enumerate() {
        for signal in SignalKind::ALL {
            for channel in ChannelId::ALL {
                if !sample.get(signal, channel).is_finite() {
                    non_finite.push(CellRef { row, signal, channel });
                }
            }
        }
        if !sample.timestamp.is_finite() {
            timestamp_anomalies.push(TimestampAnomaly::NonFinite { row });
        } else if row > 0 {
            let previous = session.samples[row - 1].timestamp;
            if previous.is_finite() && sample.timestamp <= previous {
                timestamp_anomalies.push(TimestampAnomaly::NotIncreasing {
                    row,
                    previous,
                    current: sample.timestamp,
                });
            }
        }
    }
    let count_mismatch = session.sample_count() != expected_samples;
    ValidationReport {
        ok: !count_mismatch && non_finite.is_empty() && timestamp_anomalies.is_empty(),
        expected_samples,
        sample_count: session.sample_count(),
        count_mismatch,
        non_finite,
        timestamp_anomalies,
    }
}

/// A set of sessions, kept sorted by (user, condition, session index).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub sessions: Vec<Session>,
}

/// Per-file outcome of [`Dataset::load`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadedFile {
    pub path: PathBuf,
    pub meta: SessionMeta,
    pub samples: usize,
    pub dropped: usize,
}

impl Dataset {
    pub fn new(mut sessions: Vec<Session>) -> Self {
        sessions.sort_by(|a, b| a.meta.cmp(&b.meta));
        Dataset { sessions }
    }

    pub fn users(&self) -> Vec<String> {
        let mut users: Vec<String> = self.sessions.iter().map(|s| s.meta.user_id.clone()).collect();
        users.dedup();
        users
    }

    /// Number of sessions per (user, condition).
    pub fn session_counts(&self) -> BTreeMap<(String, Condition), usize> {
        let mut counts = BTreeMap::new();
        for s in &self.sessions {
            *counts.entry((s.meta.user_id.clone(), s.meta.condition)).or_insert(0) += 1;
        }
        counts
    }

    pub fn session_path(root: &Path, meta: &SessionMeta) -> PathBuf {
        root.join(&meta.user_id)
            .join(meta.condition.as_str())
            .join(format!("{}.csv", meta.session_index))
    }

    /// Reads every `<user>/<condition>/<index>.csv` below `root`. Files at the
    /// root level and non-CSV files are ignored.
    pub fn load(root: &Path, mapping: &ColumnMapping) -> Result<(Dataset, Vec<LoadedFile>), IngestError> {
        let mut sessions = Vec::new();
        let mut files = Vec::new();
        for user_dir in sorted_entries(root)? {
            if !user_dir.is_dir() {
                continue;
            }
            let user_id = file_name(&user_dir);
            for cond_dir in sorted_entries(&user_dir)? {
                if !cond_dir.is_dir() {
                    continue;
                }
                let condition: Condition = file_name(&cond_dir).parse().map_err(|e| IngestError::Layout {
                    path: cond_dir.clone(),
                    reason: format!("{e}"),
                })?;
                for file in sorted_entries(&cond_dir)? {
                    if file.extension().and_then(|e| e.to_str()) != Some("csv") {
                        continue;
                    }
                    let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                    let session_index: u32 = stem.parse().map_err(|_| IngestError::Layout {
                        path: file.clone(),
                        reason: "file name is not a session index".into(),
                    })?;
                    let meta = SessionMeta::new(user_id.clone(), condition, session_index);
                    let bytes = fs::read(&file).map_err(io_err(&file))?;
                    let parsed = parse_session(bytes.as_slice(), meta.clone(), mapping).map_err(|e| {
                        IngestError::File { path: file.clone(), source: Box::new(e) }
                    })?;
                    files.push(LoadedFile {
                        path: file.clone(),
                        meta,
                        samples: parsed.session.sample_count(),
                        dropped: parsed.dropped,
                    });
                    sessions.push(parsed.session);
                }
            }
        }
        Ok((Dataset::new(sessions), files))
    }

    /// Writes every session in canonical form below `root`.
    pub fn write(&self, root: &Path) -> Result<Vec<PathBuf>, IngestError> {
        let mut written = Vec::with_capacity(self.sessions.len());
        for session in &self.sessions {
            let path = Self::session_path(root, &session.meta);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            let mut buf = Vec::new();
            write_session_csv(session, &mut buf)?;
            fs::write(&path, buf).map_err(io_err(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut entries = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(dir))?;
    entries.sort();
    Ok(entries)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        let m = ColumnMapping::canonical();
        std::iter::once(m.timestamp.clone()).chain(m.signals).collect::<Vec<_>>().join(",")
    }

    fn row(t: f64, base: f64) -> Vec<String> {
        std::iter::once(format!("{t}"))
            .chain((0..SAMPLE_WIDTH).map(|i| format!("{}", base + i as f64 * 0.01)))
            .collect()
    }

    fn meta() -> SessionMeta {
        SessionMeta::new("u1", Condition::SameSong, 1)
    }

    fn fixture(rows: usize, blank_alpha_af7: &[usize]) -> String {
        let alpha_af7 = 1 + sample_slot(SignalKind::Alpha, ChannelId::Af7);
        let mut text = header();
        text.push('\n');
        for r in 0..rows {
            let mut cells = row(r as f64 * 0.5, r as f64);
            if blank_alpha_af7.contains(&r) {
                cells[alpha_af7].clear();
            }
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        text
    }

    #[test]
    fn parses_complete_file() {
        let text = fixture(300, &[]);
        let parsed = parse_session(text.as_bytes(), meta(), &ColumnMapping::canonical()).unwrap();
        assert_eq!(parsed.session.sample_count(), 300);
        assert_eq!(parsed.dropped, 0);
        assert_eq!(parsed.session.samples[0].values.len(), 24);
        assert_eq!(parsed.session.recording_interval_s, 0.5);
    }

    #[test]
    fn drops_rows_with_blank_cells_without_reordering() {
        let blanks = [3, 50, 51, 200, 304];
        let text = fixture(305, &blanks);
        let parsed = parse_session(text.as_bytes(), meta(), &ColumnMapping::canonical()).unwrap();
        assert_eq!(parsed.session.sample_count(), 300);
        assert_eq!(parsed.dropped, 5);
        let kept: Vec<usize> = (0..305).filter(|r| !blanks.contains(r)).collect();
        for (sample, &r) in parsed.session.samples.iter().zip(&kept) {
            assert_eq!(sample.timestamp, r as f64 * 0.5);
        }
    }

    #[test]
    fn non_numeric_cell_drops_row() {
        let mut text = fixture(3, &[]);
        text = text.replacen("1.01", "abc", 1);
        let parsed = parse_session(text.as_bytes(), meta(), &ColumnMapping::canonical()).unwrap();
        assert_eq!(parsed.dropped, 1);
        assert_eq!(parsed.session.sample_count(), 2);
    }

    #[test]
    fn missing_column_is_named() {
        let text = fixture(5, &[]).replacen("Gamma_TP10", "Gamma_XX", 1);
        match parse_session(text.as_bytes(), meta(), &ColumnMapping::canonical()) {
            Err(IngestError::MissingColumn(c)) => assert_eq!(c, "Gamma_TP10"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn mapping_override_resolves_renamed_column() {
        let text = fixture(5, &[]).replacen("Gamma_TP10", "gamma10", 1).replacen("TimeStamp", "t", 1);
        let mapping = ColumnMapping::with_overrides([("Gamma_TP10", "gamma10"), ("TimeStamp", "t")]).unwrap();
        let parsed = parse_session(text.as_bytes(), meta(), &mapping).unwrap();
        assert_eq!(parsed.session.sample_count(), 5);
        assert!(ColumnMapping::with_overrides([("Gamma_FP1", "x")]).is_err());
    }

    #[test]
    fn empty_and_non_monotonic_sessions_fail() {
        let text = fixture(4, &[0, 1, 2, 3]);
        assert!(matches!(
            parse_session(text.as_bytes(), meta(), &ColumnMapping::canonical()),
            Err(IngestError::EmptySession { dropped: 4 })
        ));
        let mut text = header();
        text.push('\n');
        for t in [0.0, 0.5, 0.25] {
            text.push_str(&row(t, 1.0).join(","));
            text.push('\n');
        }
        assert!(matches!(
            parse_session(text.as_bytes(), meta(), &ColumnMapping::canonical()),
            Err(IngestError::NonMonotonicTime { row: 2, .. })
        ));
    }

    #[test]
    fn wall_clock_timestamps() {
        let mut text = header();
        text.push('\n');
        for t in ["2017-06-13 16:30:04.000", "2017-06-13 16:30:04.500"] {
            let mut cells = row(0.0, 1.0);
            cells[0] = t.to_string();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        let parsed = parse_session(text.as_bytes(), meta(), &ColumnMapping::canonical()).unwrap();
        let s = &parsed.session.samples;
        assert!((s[1].timestamp - s[0].timestamp - 0.5).abs() < 1e-6);
    }

    #[test]
    fn drop_delta_projects_columns() {
        let text = fixture(300, &[]);
        let session = parse_session(text.as_bytes(), meta(), &ColumnMapping::canonical()).unwrap().session;
        let reduced = drop_delta(&session);
        assert_eq!(reduced.sample_count(), 300);
        assert_eq!(reduced.samples[0].len(), 20);
        for (t, (full, red)) in session.samples.iter().zip(&reduced.samples).enumerate() {
            assert_eq!(reduced.timestamps[t], full.timestamp);
            for signal in SignalKind::RETAINED {
                for channel in ChannelId::ALL {
                    let a = full.get(signal, channel);
                    let b = red[reduced_slot(signal, channel).unwrap()];
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }

    #[test]
    fn zero_delta_is_plain_projection() {
        let text = fixture(10, &[]);
        let mut session = parse_session(text.as_bytes(), meta(), &ColumnMapping::canonical()).unwrap().session;
        let before = drop_delta(&session);
        for s in &mut session.samples {
            for c in ChannelId::ALL {
                s.values[sample_slot(SignalKind::Delta, c)] = 0.0;
            }
        }
        assert_eq!(drop_delta(&session), before);
    }

    #[test]
    fn validation_reports() {
        let text = fixture(300, &[]);
        let session = parse_session(text.as_bytes(), meta(), &ColumnMapping::canonical()).unwrap().session;
        assert!(validate_session(&session, 300).ok);

        let mut short = session.clone();
        short.samples.truncate(298);
        let report = validate_session(&short, 300);
        assert!(!report.ok && report.count_mismatch);

        let mut faulty = session.clone();
        faulty.samples[17].values[sample_slot(SignalKind::Beta, ChannelId::Af8)] = f64::NAN;
        let snapshot = faulty.clone();
        let report = validate_session(&faulty, 300);
        assert!(!report.ok);
        assert_eq!(
            report.non_finite,
            vec![CellRef { row: 17, signal: SignalKind::Beta, channel: ChannelId::Af8 }]
        );
        // report-only
        assert_eq!(faulty.samples[17].timestamp, snapshot.samples[17].timestamp);

        let mut backwards = session;
        backwards.samples[5].timestamp = 0.0;
        let report = validate_session(&backwards, 300);
        assert_eq!(
            report.timestamp_anomalies,
            vec![TimestampAnomaly::NotIncreasing { row: 5, previous: 2.0, current: 0.0 }]
        );
    }

    #[test]
    fn session_new_enforces_invariants() {
        let s = |t: f64, v: f64| Sample { timestamp: t, values: [v; SAMPLE_WIDTH] };
        assert!(Session::new(meta(), 0.5, vec![s(0.0, 1.0), s(0.5, 1.0)]).is_ok());
        assert!(Session::new(meta(), 0.5, vec![s(0.0, 1.0), s(0.0, 1.0)]).is_err());
        assert!(Session::new(meta(), 0.5, vec![s(0.0, f64::INFINITY)]).is_err());
        assert!(Session::new(meta(), 0.5, vec![]).is_err());
    }
}
