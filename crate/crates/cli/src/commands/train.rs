//! `train`, `identify` and `verify`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use musicid::eval::{cross_validate, score_identification, score_verification, split_matrix, CvReport, EvalReport};
use musicid::featurize::{featurize_session, select_features, FeatureMatrix, FeatureSelection};
use musicid::forest::{majority, train_forest, train_ovr};
use musicid::ingest::{drop_delta, parse_session, ColumnMapping, SessionMeta};
use musicid::{Condition, Forest, OvrModel};
use serde::{Deserialize, Serialize};

use super::load_features;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Output, MODELS_DIR, REPORTS_DIR};
use crate::GlobalArgs;

const MODEL_FORMAT: &str = "musicid-model";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", content = "model", rename_all = "snake_case")]
pub enum Model {
    Identification(Forest),
    Verification(OvrModel),
}

/// A trained model with the framing and feature selection it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub selection: FeatureSelection,
    pub conditions: Vec<Condition>,
    #[serde(flatten)]
    pub model: Model,
}

impl ModelFile {
    pub fn new(config: &RunConfig, conditions: Vec<Condition>, model: Model) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            frame_len: config.frame_len,
            hop: config.hop,
            selection: config.selection.clone(),
            conditions,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string(self).map_err(|e| CliError::Internal(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ModelFile, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let bad = |reason: String| CliError::BadFile { path: path.to_path_buf(), reason };
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(bad(format!("unsupported model format {} v{}", file.format, file.version)));
        }
        match &file.model {
            Model::Identification(f) => f.validate(),
            Model::Verification(m) => m.validate(),
        }
        .map_err(|e| bad(e.to_string()))?;
        Ok(file)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Identification,
    Verification,
    Both,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub task: TaskArg,
    /// Tree depths to train (default: the configured depth).
    #[arg(long, value_delimiter = ',')]
    pub depths: Vec<usize>,
    /// Conditions to train on (default: every condition present).
    #[arg(long, value_delimiter = ',')]
    pub condition: Vec<Condition>,
    /// Skip k-fold cross-validation on the training split.
    #[arg(long)]
    pub no_cv: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResult {
    pub condition: Condition,
    pub depth: usize,
    pub model_file: PathBuf,
    pub train_rows: usize,
    pub test_rows: usize,
    pub held_out: EvalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvReport>,
}

pub fn train(args: &TrainArgs, config: &RunConfig, features: Option<&Path>) -> Result<(), CliError> {
    let matrix = load_features(config, features)?;
    let conditions = crate::conditions_or_present(&args.condition, matrix.conditions());
    let mut depths = if args.depths.is_empty() { vec![config.forest.max_depth] } else { args.depths.clone() };
    depths.sort();
    depths.dedup();
    if depths.contains(&0) {
        return Err(CliError::Usage("depths must be at least 1".into()));
    }
    let out = Output::new(config);
    for condition in conditions {
        let part = matrix.for_condition(condition);
        if part.is_empty() {
            return Err(CliError::MissingInput(format!("no {condition} frames")));
        }
        let (train, test) = split_matrix(&part, &config.split)?;
        for &depth in &depths {
            let params = config.forest_params().with_depth(depth);
            if args.task != TaskArg::Verification {
                let forest = train_forest(&train, &params)?;
                let mut held_out = score_identification(&forest, &test)?;
                held_out.config.train_conditions = vec![condition];
                held_out.config.selection = Some(config.selection.clone());
                let cv = if args.no_cv { None } else { Some(cross_validate(&train, config.cv_folds, &params, config.seed)?) };
                let name = format!("identification_{condition}_depth{depth}");
                let model_rel = format!("{MODELS_DIR}/{name}.json");
                let model = ModelFile::new(config, vec![condition], Model::Identification(forest));
                out.write_bytes(&model_rel, model.to_json()?.as_bytes())?;
                out.write_bytes(&format!("{REPORTS_DIR}/confusion_{name}.csv"), held_out.confusion_csv().as_bytes())?;
                println!(
                    "identification {condition} depth {depth}: held-out {:.2}%{}",
                    held_out.accuracy * 100.0,
                    cv.as_ref().map_or(String::new(), |c| format!(", {}-fold cv {:.2}%", c.k, c.mean_accuracy * 100.0))
                );
                let result = TrainResult {
                    condition,
                    depth,
                    model_file: model_rel.into(),
                    train_rows: train.len(),
                    test_rows: test.len(),
                    held_out,
                    cv,
                };
                out.write_report(&format!("{REPORTS_DIR}/train_{name}.json"), "train_identification", config, &result)?;
            }
            if args.task != TaskArg::Identification {
                let model = train_ovr(&train, &params, config.threshold)?;
                let mut held_out = score_verification(&model, &test)?;
                held_out.config.train_conditions = vec![condition];
                held_out.config.selection = Some(config.selection.clone());
                let name = format!("verification_{condition}_depth{depth}");
                let model_rel = format!("{MODELS_DIR}/{name}.json");
                let file = ModelFile::new(config, vec![condition], Model::Verification(model));
                out.write_bytes(&model_rel, file.to_json()?.as_bytes())?;
                out.write_bytes(&format!("{REPORTS_DIR}/confusion_{name}.csv"), held_out.confusion_csv().as_bytes())?;
                println!("verification {condition} depth {depth}: held-out {:.2}%", held_out.accuracy * 100.0);
                let result = TrainResult {
                    condition,
                    depth,
                    model_file: model_rel.into(),
                    train_rows: train.len(),
                    test_rows: test.len(),
                    held_out,
                    cv: None,
                };
                out.write_report(&format!("{REPORTS_DIR}/train_{name}.json"), "train_verification", config, &result)?;
            }
        }
    }
    Ok(())
}

/// Featurizes one session file the way `model` expects.
fn session_features(
    model: &ModelFile,
    session_file: &Path,
    user: Option<&str>,
    global: &GlobalArgs,
) -> Result<FeatureMatrix, CliError> {
    let requested = (global.frame_len.unwrap_or(model.frame_len), global.hop.unwrap_or(model.hop));
    if requested != (model.frame_len, model.hop) {
        return Err(CliError::Usage(format!(
            "framing mismatch: model expects frame_len {} hop {}, got frame_len {} hop {}",
            model.frame_len, model.hop, requested.0, requested.1
        )));
    }
    let bytes = fs::read(session_file).map_err(|e| CliError::io(session_file, e))?;
    let condition = model.conditions.first().copied().unwrap_or(Condition::SameSong);
    let meta = SessionMeta::new(user.unwrap_or("unknown"), condition, 1);
    let parsed = parse_session(bytes.as_slice(), meta, &ColumnMapping::canonical()).map_err(|e| {
        musicid::ingest::IngestError::File { path: session_file.to_path_buf(), source: Box::new(e) }
    })?;
    let frames = featurize_session(&drop_delta(&parsed.session), model.frame_len, model.hop)?;
    Ok(select_features(&frames, &model.selection)?)
}

fn output_name(path: &Path) -> String {
    let parts: Vec<String> = path
        .components()
        .rev()
        .take(3)
        .map(|c| c.as_os_str().to_string_lossy().trim_end_matches(".csv").to_string())
        .collect();
    parts.into_iter().rev().collect::<Vec<_>>().join("_")
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Session CSV in the canonical layout.
    pub session: PathBuf,
    /// True user, if known; adds frame accuracy to the output.
    #[arg(long)]
    pub user: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FramePrediction {
    pub frame: usize,
    pub predicted: String,
    /// Vote fraction per enrolled user.
    pub votes: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionDecision {
    pub method: String,
    pub user: String,
    pub frames_for: usize,
    pub frames_total: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IdentifyResult {
    pub model: PathBuf,
    pub session: PathBuf,
    pub frames: Vec<FramePrediction>,
    pub session_decision: SessionDecision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_accuracy: Option<f64>,
}

pub fn identify(args: &IdentifyArgs, config: &RunConfig, global: &GlobalArgs) -> Result<(), CliError> {
    let model = ModelFile::load(&args.model)?;
    let Model::Identification(forest) = &model.model else {
        return Err(CliError::Usage(format!("{} is not an identification model", args.model.display())));
    };
    let matrix = session_features(&model, &args.session, args.user.as_deref(), global)?;
    let predictions = forest.predict_matrix(&matrix)?;
    let mut counts = vec![0u32; forest.label_set.len()];
    let frames: Vec<FramePrediction> = predictions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            counts[p.class] += 1;
            FramePrediction {
                frame: i,
                predicted: forest.label(p.class).to_string(),
                votes: forest.label_set.iter().cloned().zip(p.votes.iter().copied()).collect(),
            }
        })
        .collect();
    let winner = majority(&counts);
    let result = IdentifyResult {
        model: args.model.clone(),
        session: args.session.clone(),
        session_decision: SessionDecision {
            method: "majority over frame predictions (session-level extension)".into(),
            user: forest.label(winner).to_string(),
            frames_for: counts[winner] as usize,
            frames_total: frames.len(),
        },
        frame_accuracy: args.user.as_ref().map(|u| {
            frames.iter().filter(|f| &f.predicted == u).count() as f64 / frames.len() as f64
        }),
        frames,
    };
    for f in &result.frames {
        println!("frame {:>3}: {} ({:.2})", f.frame, f.predicted, f.votes[&f.predicted]);
    }
    let d = &result.session_decision;
    println!("session: {} ({} of {} frames; session-level extension)", d.user, d.frames_for, d.frames_total);
    let rel = format!("identify/{}.json", output_name(&args.session));
    Output::new(config).write_report(&rel, "identify", config, &result)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Claimed user id.
    #[arg(long)]
    pub claim: String,
    pub session: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FrameVerification {
    pub frame: usize,
    pub score: f64,
    pub accept: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyResult {
    pub model: PathBuf,
    pub session: PathBuf,
    pub claim: String,
    pub threshold: f64,
    pub frames: Vec<FrameVerification>,
    /// Accepted when more than half of the frames are accepted
    /// (session-level extension).
    pub session_accept: bool,
    pub frames_accepted: usize,
}

pub fn verify(args: &VerifyArgs, config: &RunConfig, global: &GlobalArgs) -> Result<(), CliError> {
    let file = ModelFile::load(&args.model)?;
    let Model::Verification(model) = &file.model else {
        return Err(CliError::Usage(format!("{} is not a verification model", args.model.display())));
    };
    let mut model = model.clone();
    if global.threshold.is_some() {
        model.set_threshold(config.threshold)?;
    }
    let matrix = session_features(&file, &args.session, Some(&args.claim), global)?;
    if let Some(forest) = model.models.values().next() {
        forest.check_columns(&matrix)?;
    }
    let frames = matrix
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let v = model.verify(&r.values, &args.claim)?;
            Ok(FrameVerification { frame: i, score: v.score, accept: v.accept })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let accepted = frames.iter().filter(|f| f.accept).count();
    let result = VerifyResult {
        model: args.model.clone(),
        session: args.session.clone(),
        claim: args.claim.clone(),
        threshold: model.threshold,
        session_accept: 2 * accepted > frames.len(),
        frames_accepted: accepted,
        frames,
    };
    for f in &result.frames {
        println!("frame {:>3}: score {:.2} {}", f.frame, f.score, if f.accept { "accept" } else { "reject" });
    }
    println!(
        "session: {} for {} ({} of {} frames accepted; session-level extension)",
        if result.session_accept { "accept" } else { "reject" },
        args.claim,
        accepted,
        result.frames.len()
    );
    let rel = format!("verify/{}_{}.json", output_name(&args.session), args.claim);
    Output::new(config).write_report(&rel, "verify", config, &result)?;
    Ok(())
}
