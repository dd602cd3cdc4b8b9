//! `report`: summary tables from the JSON reports of earlier commands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use musicid::eval::{band_subsets, cross_condition_table, electrode_subsets, AblationAxis, AblationRow, CrossCell, Table};
use musicid::Condition;
use serde::Serialize;

use super::experiments::{axis_name, read_ablation, ImportanceResult};
use super::train::TrainResult;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{read_report, Output, REPORTS_DIR, SUMMARY_DIR};

const ABSENT: &str = "absent";

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

fn report_files(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            name.starts_with(prefix) && name.ends_with(".json")
        })
        .collect();
    files.sort();
    Ok(files)
}

fn depth_table(title: &str, results: &[TrainResult], default_depth: usize, with_cv: bool) -> Table {
    let mut header = vec!["depth".to_string()];
    for c in Condition::ALL {
        header.push(format!("{c}_held_out"));
        if with_cv {
            header.push(format!("{c}_cv"));
        }
    }
    let mut t = Table { title: title.to_string(), header, rows: Vec::new() };
    let mut depths: Vec<usize> = results.iter().map(|r| r.depth).collect();
    if depths.is_empty() {
        depths.push(default_depth);
    }
    depths.sort();
    depths.dedup();
    for d in depths {
        let mut row = vec![d.to_string()];
        for c in Condition::ALL {
            let hit = results.iter().find(|r| r.depth == d && r.condition == c);
            row.push(hit.map_or(ABSENT.into(), |r| pct(r.held_out.accuracy)));
            if with_cv {
                row.push(hit.and_then(|r| r.cv.as_ref()).map_or(ABSENT.into(), |cv| pct(cv.mean_accuracy)));
            }
        }
        t.push(row);
    }
    t
}

fn importance_table(results: &BTreeMap<Condition, ImportanceResult>, top: usize) -> Table {
    let mut t = Table::new(
        "Top features by importance",
        &["rank", "same_song_feature", "same_song_importance", "favorite_song_feature", "favorite_song_importance"],
    );
    for i in 0..top {
        let mut row = vec![(i + 1).to_string()];
        for c in Condition::ALL {
            match results.get(&c).and_then(|r| r.ranked.get(i)) {
                Some((name, v)) => {
                    row.push(name.clone());
                    row.push(format!("{v:.6}"));
                }
                None => {
                    row.push(ABSENT.into());
                    row.push(ABSENT.into());
                }
            }
        }
        t.push(row);
    }
    t
}

fn summary_table(rows: &[AblationRow]) -> Table {
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
    let blocks = [(AblationAxis::Electrode, electrode_subsets()), (AblationAxis::Band, band_subsets())];
    for (axis, subsets) in blocks {
        let mut names = vec!["All".to_string()];
        names.extend(subsets.into_iter().map(|s| s.name));
        for name in names {
            let hits: Vec<&AblationRow> = rows.iter().filter(|r| r.axis == axis && r.subset == name).collect();
            if name == "All" && hits.is_empty() {
                continue;
            }
            let mut row = vec![axis.title().to_string(), name.clone()];
            for c in Condition::ALL {
                let hit = hits.iter().find(|r| r.condition == c);
                row.push(hit.map_or(ABSENT.into(), |r| pct(r.identification.accuracy)));
                row.push(hit.and_then(|r| r.verification.as_ref()).map_or(ABSENT.into(), |v| pct(v.accuracy)));
            }
            t.push(row);
        }
    }
    t
}

#[derive(Serialize)]
struct Summary<'a> {
    missing_inputs: &'a [String],
    tables: &'a [(&'static str, Table)],
}

pub fn report(config: &RunConfig) -> Result<(), CliError> {
    let dir = config.output.join(REPORTS_DIR);
    if !dir.is_dir() {
        return Err(CliError::MissingInput(format!("no reports in {}; run experiments first", dir.display())));
    }
    let mut missing = Vec::new();

    let mut identification = Vec::new();
    for p in report_files(&dir, "train_identification_")? {
        identification.push(read_report::<TrainResult>(&p)?.result);
    }
    let mut verification = Vec::new();
    for p in report_files(&dir, "train_verification_")? {
        verification.push(read_report::<TrainResult>(&p)?.result);
    }
    if identification.is_empty() {
        missing.push("identification training reports (run `train`)".to_string());
    }
    if verification.is_empty() {
        missing.push("verification training reports (run `train`)".to_string());
    }

    let mut importance = BTreeMap::new();
    for p in report_files(&dir, "importance_")? {
        let r = read_report::<ImportanceResult>(&p)?.result;
        importance.insert(r.condition, r);
    }
    if importance.is_empty() {
        missing.push("importance reports (run `importance`)".to_string());
    }

    let cross_path = dir.join("cross_condition.json");
    let cross: Vec<CrossCell> = if cross_path.is_file() {
        read_report::<Vec<CrossCell>>(&cross_path)?.result
    } else {
        missing.push("cross-condition report (run `cross-eval`)".to_string());
        Vec::new()
    };

    let mut ablation = Vec::new();
    for axis in [AblationAxis::Electrode, AblationAxis::Band] {
        let p = dir.join(format!("ablation_{}.json", axis_name(axis)));
        if p.is_file() {
            ablation.extend(read_ablation(&p)?);
        } else {
            missing.push(format!("{} ablation report (run `ablate`)", axis_name(axis)));
        }
    }

    let mut cross_table = cross_condition_table(&cross);
    if cross_table.rows.is_empty() {
        for train in ["same_song", "favorite_song", "combined"] {
            cross_table.push(vec![train.into(), ABSENT.into(), ABSENT.into()]);
        }
    }
    let tables = [
        (
            "table3_identification",
            depth_table("Identification accuracy by tree depth", &identification, config.forest.max_depth, true),
        ),
        (
            "table4_verification",
            depth_table("Verification accuracy by tree depth", &verification, config.forest.max_depth, false),
        ),
        ("table5_importance", importance_table(&importance, 10)),
        ("table6_cross_condition", cross_table),
        ("table7_summary", summary_table(&ablation)),
    ];
    let out = Output::new(config);
    for (stem, table) in &tables {
        out.write_table(&format!("{SUMMARY_DIR}/{stem}"), table)?;
        println!("{}", table.to_text());
    }
    out.write_report(
        &format!("{SUMMARY_DIR}/summary.json"),
        "report",
        config,
        &Summary { missing_inputs: &missing, tables: &tables },
    )?;
    for m in &missing {
        eprintln!("warning: missing {m}; cells marked \"{ABSENT}\"");
    }
    Ok(())
}
