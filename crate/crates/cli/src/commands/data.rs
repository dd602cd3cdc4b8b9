//! `synth`, `ingest` and `featurize`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use musicid::featurize::featurize_dataset;
use musicid::ingest::{
    parse_session, validate_session, ColumnMapping, Dataset, SessionMeta, ValidationReport, NOMINAL_SESSION_SAMPLES,
};
use musicid::synth::{generate_cohort, CohortSpec};
use musicid::{Condition, SignalKind};
use serde::Serialize;

use super::load_dataset;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Output, REPORTS_DIR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 20 users with 2 sessions each, well separated.
    Default,
    /// Session counts of the original study.
    Study,
    /// Study shape with moderate separation and a condition shift.
    Reference,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "default")]
    pub preset: Preset,
    /// Number of users, each with `--sessions-each` sessions.
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub sessions_each: usize,
    /// Per-user session counts, e.g. 5,5,4,2.
    #[arg(long, value_delimiter = ',', conflicts_with = "users")]
    pub sessions: Option<Vec<usize>>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// User baseline spread in multiples of the signal std.
    #[arg(long)]
    pub separation: Option<f64>,
    /// Condition offset scale in multiples of the signal std.
    #[arg(long)]
    pub shift: Option<f64>,
    /// Per-session baseline drift in multiples of the signal std.
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Signals that carry user identity (default: all).
    #[arg(long, value_delimiter = ',')]
    pub informative: Option<Vec<SignalKind>>,
    /// Destination root (default: the configured dataset root).
    #[arg(long)]
    pub to: Option<PathBuf>,
    /// Write into a non-empty destination.
    #[arg(long)]
    pub force: bool,
}

impl SynthArgs {
    pub fn spec(&self, seed: u64) -> CohortSpec {
        let mut spec = match self.preset {
            Preset::Default => CohortSpec::default(),
            Preset::Study => CohortSpec::study_shape(),
            Preset::Reference => CohortSpec::reference(),
        };
        spec.seed = seed;
        if let Some(n) = self.users {
            spec.sessions_per_user = vec![self.sessions_each; n];
        }
        if let Some(s) = &self.sessions {
            spec.sessions_per_user = s.clone();
        }
        if let Some(v) = self.samples {
            spec.samples_per_session = v;
        }
        if let Some(v) = self.separation {
            spec.separation = v;
        }
        if let Some(v) = self.shift {
            spec.condition_shift = v;
        }
        if let Some(v) = self.jitter {
            spec.session_jitter = v;
        }
        if let Some(v) = &self.informative {
            spec.informative = v.iter().copied().collect();
        }
        spec
    }
}

#[derive(Serialize)]
struct SynthSummary<'a> {
    spec: &'a CohortSpec,
    destination: &'a Path,
    sessions: usize,
    per_condition: BTreeMap<Condition, usize>,
}

fn per_condition<'a>(metas: impl Iterator<Item = &'a SessionMeta>) -> BTreeMap<Condition, usize> {
    let mut counts = BTreeMap::new();
    for m in metas {
        *counts.entry(m.condition).or_insert(0) += 1;
    }
    counts
}

pub fn synth(args: &SynthArgs, config: &RunConfig) -> Result<(), CliError> {
    let spec = args.spec(config.seed);
    spec.validate(config.frame_len).map_err(|e| CliError::Usage(e.to_string()))?;
    let dest = args.to.as_deref().unwrap_or(&config.dataset);
    if !args.force && dest.is_dir() {
        let occupied = fs::read_dir(dest).map_err(|e| CliError::io(dest, e))?.next().is_some();
        if occupied {
            return Err(CliError::Usage(format!("{} is not empty (use --force)", dest.display())));
        }
    }
    let dataset = generate_cohort(&spec)?;
    dataset.write(dest)?;
    let summary = SynthSummary {
        spec: &spec,
        destination: dest,
        sessions: dataset.sessions.len(),
        per_condition: per_condition(dataset.sessions.iter().map(|s| &s.meta)),
    };
    Output::new(config).write_report(&format!("{REPORTS_DIR}/synth.json"), "synth", config, &summary)?;
    println!(
        "wrote {} sessions for {} users to {}",
        dataset.sessions.len(),
        spec.n_users(),
        dest.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Session files; without any, the whole dataset root is ingested.
    pub files: Vec<PathBuf>,
    /// User id for a single file (default: inferred from <user>/<condition>/<index>.csv).
    #[arg(long)]
    pub user: Option<String>,
    #[arg(long)]
    pub condition: Option<Condition>,
    #[arg(long)]
    pub session: Option<u32>,
    /// Column rename CANONICAL=HEADER, e.g. Alpha_TP9=alpha_tp9 (repeatable).
    #[arg(long = "map", value_name = "CANONICAL=HEADER")]
    pub map: Vec<String>,
    #[arg(long, default_value_t = NOMINAL_SESSION_SAMPLES)]
    pub expected_samples: usize,
}

#[derive(Serialize)]
struct IngestedSession {
    source: PathBuf,
    normalized: PathBuf,
    meta: SessionMeta,
    samples: usize,
    dropped_rows: usize,
    validation: ValidationReport,
}

#[derive(Serialize)]
struct IngestSummary {
    sessions: usize,
    with_warnings: usize,
    per_condition: BTreeMap<Condition, usize>,
    files: Vec<IngestedSession>,
}

fn mapping(args: &IngestArgs) -> Result<ColumnMapping, CliError> {
    let pairs = args
        .map
        .iter()
        .map(|m| m.split_once('=').ok_or_else(|| CliError::Usage(format!("--map expects CANONICAL=HEADER, got '{m}'"))))
        .collect::<Result<Vec<_>, _>>()?;
    ColumnMapping::with_overrides(pairs).map_err(|e| CliError::Usage(e.to_string()))
}

fn infer_meta(path: &Path, args: &IngestArgs) -> Result<SessionMeta, CliError> {
    let name = |p: Option<&Path>| p.and_then(Path::file_name).map(|n| n.to_string_lossy().into_owned());
    let cond_dir = path.parent();
    let user = args.user.clone().or_else(|| name(cond_dir.and_then(Path::parent)));
    let condition = args.condition.or_else(|| name(cond_dir).and_then(|c| c.parse().ok()));
    let session = args
        .session
        .or_else(|| path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()));
    match (user, condition, session) {
        (Some(user), Some(condition), Some(session)) => Ok(SessionMeta::new(user, condition, session)),
        _ => Err(CliError::Usage(format!(
            "cannot tell user/condition/session of {}; pass --user, --condition and --session",
            path.display()
        ))),
    }
}

pub fn ingest(args: &IngestArgs, config: &RunConfig) -> Result<(), CliError> {
    let mapping = mapping(args)?;
    let mut sources = Vec::new();
    let mut sessions = Vec::new();
    let mut dropped = Vec::new();
    if args.files.is_empty() {
        if !config.dataset.is_dir() {
            return Err(CliError::MissingInput(format!("dataset directory {}", config.dataset.display())));
        }
        let (dataset, files) = Dataset::load(&config.dataset, &mapping)?;
        let mut by_meta: BTreeMap<SessionMeta, (PathBuf, usize)> =
            files.into_iter().map(|f| (f.meta, (f.path, f.dropped))).collect();
        for s in dataset.sessions {
            let (path, d) = by_meta.remove(&s.meta).expect("every session comes from a file");
            sources.push(path);
            dropped.push(d);
            sessions.push(s);
        }
    } else {
        if args.files.len() > 1 && (args.user.is_some() || args.session.is_some()) {
            return Err(CliError::Usage("--user and --session apply to a single file".into()));
        }
        for path in &args.files {
            let meta = infer_meta(path, args)?;
            let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
            let parsed = parse_session(bytes.as_slice(), meta, &mapping).map_err(|e| {
                musicid::ingest::IngestError::File { path: path.clone(), source: Box::new(e) }
            })?;
            sources.push(path.clone());
            dropped.push(parsed.dropped);
            sessions.push(parsed.session);
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in &sessions {
        if !seen.insert(&s.meta) {
            return Err(CliError::Usage(format!(
                "two files map to {}/{}/{}",
                s.meta.user_id, s.meta.condition, s.meta.session_index
            )));
        }
    }
    let out = Output::new(config);
    let mut files = Vec::with_capacity(sessions.len());
    for ((session, source), dropped_rows) in sessions.iter().zip(sources).zip(dropped) {
        let rel = Dataset::session_path(Path::new("sessions"), &session.meta);
        let mut buf = Vec::new();
        musicid::ingest::write_session_csv(session, &mut buf)?;
        out.write_bytes(&rel.to_string_lossy(), &buf)?;
        let validation = validate_session(session, args.expected_samples);
        if !validation.ok {
            eprintln!(
                "warning: {}: {} samples (expected {}), {} timestamp anomalies",
                source.display(),
                validation.sample_count,
                validation.expected_samples,
                validation.timestamp_anomalies.len()
            );
        }
        files.push(IngestedSession {
            source,
            normalized: rel,
            meta: session.meta.clone(),
            samples: session.sample_count(),
            dropped_rows,
            validation,
        });
    }
    files.sort_by(|a, b| a.meta.cmp(&b.meta));
    let summary = IngestSummary {
        sessions: files.len(),
        with_warnings: files.iter().filter(|f| !f.validation.ok || f.dropped_rows > 0).count(),
        per_condition: per_condition(files.iter().map(|f| &f.meta)),
        files,
    };
    out.write_report("ingest_summary.json", "ingest", config, &summary)?;
    let counts: Vec<String> = summary.per_condition.iter().map(|(c, n)| format!("{c}: {n}")).collect();
    println!("ingested {} sessions ({})", summary.sessions, counts.join(", "));
    Ok(())
}

#[derive(Serialize)]
struct FeaturizeSummary {
    rows: usize,
    n_features: usize,
    frame_len: usize,
    hop: usize,
    frames_per_user: BTreeMap<String, BTreeMap<Condition, usize>>,
}

pub fn featurize(config: &RunConfig) -> Result<(), CliError> {
    let dataset = load_dataset(config)?;
    let matrix = featurize_dataset(&dataset, config.frame_len, config.hop)?;
    let out = Output::new(config);
    let mut buf = Vec::new();
    matrix.write_csv(&mut buf)?;
    let path = out.write_bytes("features.csv", &buf)?;
    let mut frames_per_user: BTreeMap<String, BTreeMap<Condition, usize>> = BTreeMap::new();
    for r in &matrix.rows {
        *frames_per_user.entry(r.origin.user_id().to_string()).or_default().entry(r.origin.condition()).or_insert(0) += 1;
    }
    let summary = FeaturizeSummary {
        rows: matrix.len(),
        n_features: matrix.n_features(),
        frame_len: config.frame_len,
        hop: config.hop,
        frames_per_user,
    };
    out.write_report(&format!("{REPORTS_DIR}/featurize.json"), "featurize", config, &summary)?;
    println!("wrote {} frames x {} features to {}", matrix.len(), matrix.n_features(), path.display());
    Ok(())
}
