use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use musicid_cli::commands::experiments::ImportanceResult;
use musicid_cli::commands::train::{Model, ModelFile, TrainResult};
use musicid_cli::output::read_report;
use musicid_cli::{CliError, RunConfig};
use tempfile::TempDir;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace { dir: tempfile::tempdir().unwrap() }
    }

    fn data(&self) -> PathBuf {
        self.dir.path().join("data")
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn args(&self, args: &[&str]) -> Vec<String> {
        let mut v = vec!["musicid".to_string()];
        v.extend(args.iter().map(|s| s.to_string()));
        v.extend(["--dataset".into(), self.data().display().to_string(), "-o".into(), self.out().display().to_string()]);
        v
    }

    fn run(&self, args: &[&str]) -> Result<(), CliError> {
        musicid_cli::run(self.args(args))
    }

    /// Runs the built binary, returning (exit code, stdout, stderr).
    fn exec(&self, args: &[&str]) -> (i32, String, String) {
        let out = Command::new(env!("CARGO_BIN_EXE_musicid")).args(&self.args(args)[1..]).output().unwrap();
        (
            out.status.code().unwrap(),
            String::from_utf8_lossy(&out.stdout).into_owned(),
            String::from_utf8_lossy(&out.stderr).into_owned(),
        )
    }
}

fn count_files(root: &Path, ext: &str) -> usize {
    let mut n = 0;
    for entry in fs::read_dir(root).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            n += count_files(&p, ext);
        } else if p.extension().is_some_and(|e| e == ext) {
            n += 1;
        }
    }
    n
}

#[test]
fn study_shaped_cohort_ingests_124_sessions() {
    let ws = Workspace::new();
    ws.run(&["synth", "--preset", "study"]).unwrap();
    assert_eq!(count_files(&ws.data(), "csv"), 124);
    ws.run(&["ingest"]).unwrap();
    let sessions = ws.out().join("sessions");
    assert_eq!(count_files(&sessions.join("user01"), "csv"), 10);
    assert_eq!(count_files(&sessions, "csv"), 124);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.out().join("ingest_summary.json")).unwrap()).unwrap();
    let text = summary.to_string();
    assert!(text.contains("124"), "{text}");
}

#[test]
fn missing_column_is_a_data_error() {
    let ws = Workspace::new();
    ws.run(&["synth", "--users", "2", "--sessions-each", "1"]).unwrap();
    let file = ws.data().join("user01/same_song/1.csv");
    let text = fs::read_to_string(&file).unwrap();
    let header = text.lines().next().unwrap();
    let drop = header.split(',').position(|c| c == "Gamma_TP10").unwrap();
    let stripped: String = text
        .lines()
        .map(|l| {
            let cells: Vec<&str> = l.split(',').enumerate().filter(|&(i, _)| i != drop).map(|(_, c)| c).collect();
            cells.join(",") + "\n"
        })
        .collect();
    fs::write(&file, stripped).unwrap();
    let (code, _, err) = ws.exec(&["ingest", file.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("Gamma_TP10"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    let ws = Workspace::new();
    assert_eq!(ws.exec(&["no-such-command"]).0, 2);
    assert_eq!(ws.exec(&["featurize", "--threshold", "2"]).0, 2);
    assert_eq!(ws.exec(&["featurize", "--train-fraction", "1.5"]).0, 2);
}

#[test]
fn missing_dataset_exits_3() {
    let ws = Workspace::new();
    let (code, _, err) = ws.exec(&["featurize"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn deeper_trees_cross_validate_better() {
    let ws = Workspace::new();
    ws.run(&["synth", "--preset", "reference", "--users", "8", "--sessions-each", "2"]).unwrap();
    ws.run(&["train", "--task", "identification", "--depths", "1,10", "--condition", "same_song", "--trees", "30"])
        .unwrap();
    let cv = |d: usize| {
        let p = ws.out().join(format!("reports/train_identification_same_song_depth{d}.json"));
        read_report::<TrainResult>(&p).unwrap().result.cv.unwrap().mean_accuracy
    };
    assert!(cv(1) < cv(10), "depth 1 {} vs depth 10 {}", cv(1), cv(10));
}

#[test]
fn identify_and_verify_a_session() {
    let ws = Workspace::new();
    ws.run(&["synth", "--users", "5", "--sessions-each", "2"]).unwrap();
    ws.run(&["train", "--condition", "same_song", "--no-cv", "--trees", "30"]).unwrap();
    let models = ws.out().join("models");
    let id_model = models.join("identification_same_song_depth10.json");
    let ver_model = models.join("verification_same_song_depth10.json");
    let session = ws.data().join("user03/same_song/2.csv");

    let (code, stdout, err) =
        ws.exec(&["identify", "--model", id_model.to_str().unwrap(), session.to_str().unwrap(), "--user", "user03"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("frame")).count(), 14);
    assert!(stdout.contains("session: user03"), "{stdout}");

    let (code, stdout, err) =
        ws.exec(&["verify", "--model", ver_model.to_str().unwrap(), "--claim", "user03", session.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("frame")).count(), 14);

    // wrong framing for the model
    let (code, _, _) =
        ws.exec(&["identify", "--model", id_model.to_str().unwrap(), session.to_str().unwrap(), "--frame-len", "30"]);
    assert_eq!(code, 2);
    // verification model passed to identify
    let (code, _, _) = ws.exec(&["identify", "--model", ver_model.to_str().unwrap(), session.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn model_files_round_trip() {
    let ws = Workspace::new();
    ws.run(&["synth", "--users", "3", "--sessions-each", "1"]).unwrap();
    ws.run(&["train", "--condition", "favorite_song", "--no-cv", "--trees", "10", "--depth", "4"]).unwrap();
    for task in ["identification", "verification"] {
        let path = ws.out().join(format!("models/{task}_favorite_song_depth4.json"));
        let text = fs::read_to_string(&path).unwrap();
        let model = ModelFile::load(&path).unwrap();
        assert_eq!(model.to_json().unwrap(), text.trim_end());
        match (&model.model, task) {
            (Model::Identification(f), "identification") => assert_eq!(f.label_set.len(), 3),
            (Model::Verification(m), "verification") => assert_eq!(m.users().count(), 3),
            _ => panic!("{task} file holds the wrong model kind"),
        }
    }
    let corrupt = ws.out().join("models/corrupt.json");
    fs::write(&corrupt, "{\"format\":\"musicid-model\"}").unwrap();
    assert!(matches!(ModelFile::load(&corrupt), Err(CliError::BadFile { .. })));
}

#[test]
fn report_marks_missing_inputs_and_is_idempotent() {
    let ws = Workspace::new();
    ws.run(&["synth", "--users", "4", "--sessions-each", "2"]).unwrap();
    ws.run(&["train", "--no-cv", "--trees", "10"]).unwrap();
    ws.run(&["importance", "--trees", "10"]).unwrap();
    let (code, _, err) = ws.exec(&["report"]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("cross-condition"), "{err}");
    let summary = ws.out().join("summary");
    let table6 = fs::read_to_string(summary.join("table6_cross_condition.csv")).unwrap();
    assert!(table6.contains("absent"), "{table6}");
    let table3 = fs::read_to_string(summary.join("table3_identification.csv")).unwrap();
    let depth10: Vec<&str> = table3.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(depth10[0], "10");
    assert!(depth10[1] != "absent" && depth10[3] != "absent", "{table3}");
    assert_eq!(depth10[2], "absent", "cv was skipped");

    let before = fs::read(summary.join("summary.json")).unwrap();
    ws.run(&["report"]).unwrap();
    assert_eq!(fs::read(summary.join("summary.json")).unwrap(), before);

    let imp = read_report::<ImportanceResult>(&ws.out().join("reports/importance_same_song.json")).unwrap().result;
    assert_eq!(imp.ranked.len(), 80);
    let total: f64 = imp.by_signal.values().sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn report_without_reports_exits_3() {
    let ws = Workspace::new();
    assert_eq!(ws.exec(&["report"]).0, 3);
}

#[test]
fn config_file_and_flags_combine() {
    let ws = Workspace::new();
    let cfg = ws.dir.path().join("run.toml");
    fs::write(&cfg, "seed = 11\nformats = [\"csv\"]\n\n[forest]\nn_trees = 12\nmax_depth = 3\n").unwrap();
    let config = RunConfig::load(&cfg).unwrap();
    assert_eq!(config.seed, 11);
    assert_eq!(RunConfig::from_toml(&config.to_toml()).unwrap(), config);

    ws.run(&["synth", "--users", "3", "--sessions-each", "1"]).unwrap();
    ws.run(&["train", "--config", cfg.to_str().unwrap(), "--no-cv", "--depth", "2"]).unwrap();
    let r = read_report::<TrainResult>(&ws.out().join("reports/train_identification_same_song_depth2.json")).unwrap();
    assert_eq!(r.config.seed, 11);
    assert_eq!(r.config.forest.n_trees, 12);
    assert_eq!(r.config.forest.max_depth, 2);
    assert!(ws.out().join("reports/confusion_identification_same_song_depth2.csv").is_file());

    fs::write(&cfg, "bogus_key = 1\n").unwrap();
    assert_eq!(ws.exec(&["featurize", "--config", cfg.to_str().unwrap()]).0, 2);
}

#[test]
fn synth_refuses_to_overwrite() {
    let ws = Workspace::new();
    ws.run(&["synth", "--users", "2", "--sessions-each", "1"]).unwrap();
    assert_eq!(ws.exec(&["synth", "--users", "2", "--sessions-each", "1"]).0, 2);
    ws.run(&["synth", "--users", "2", "--sessions-each", "1", "--force"]).unwrap();
}
