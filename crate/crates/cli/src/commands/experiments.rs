//! `ablate`, `cross-eval`, `anova` and `importance`.

use std::collections::BTreeMap;
use std::path::Path;

use clap::{Args, ValueEnum};
use musicid::eval::{
    ablate as run_ablation, ablation_table, anova_f, band_subsets, cross_condition_grid, cross_condition_table,
    electrode_subsets, split_matrix, AblationAxis, AblationRow, AblationSubset, AnovaEntry, AnovaReport, CrossCell,
    Table, TrainSource,
};
use musicid::featurize::FeatureId;
use musicid::forest::train_forest;
use musicid::Condition;
use serde::{Deserialize, Serialize};

use super::{load_all_features, load_features};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Output, REPORTS_DIR, TABLES_DIR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Electrode,
    Band,
    Both,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub axis: AxisArg,
    /// Identification only.
    #[arg(long)]
    pub no_verification: bool,
}

pub fn axis_name(axis: AblationAxis) -> &'static str {
    match axis {
        AblationAxis::Electrode => "electrode",
        AblationAxis::Band => "band",
    }
}

pub fn ablate(args: &AblateArgs, config: &RunConfig, features: Option<&Path>) -> Result<(), CliError> {
    // ablations choose their own columns, so start from the full feature set
    let matrix = load_all_features(config, features)?;
    let axes: &[AblationAxis] = match args.axis {
        AxisArg::Electrode => &[AblationAxis::Electrode],
        AxisArg::Band => &[AblationAxis::Band],
        AxisArg::Both => &[AblationAxis::Electrode, AblationAxis::Band],
    };
    let threshold = (!args.no_verification).then_some(config.threshold);
    let out = Output::new(config);
    for &axis in axes {
        let mut subsets = vec![AblationSubset::all()];
        subsets.extend(match axis {
            AblationAxis::Electrode => electrode_subsets(),
            AblationAxis::Band => band_subsets(),
        });
        let rows = run_ablation(&matrix, axis, &subsets, &config.split, &config.forest_params(), threshold)?;
        let name = axis_name(axis);
        out.write_report(&format!("{REPORTS_DIR}/ablation_{name}.json"), "ablation", config, &rows)?;
        let table = ablation_table(&rows);
        out.write_table(&format!("{TABLES_DIR}/ablation_{name}"), &table)?;
        print!("{}", table.to_text());
    }
    Ok(())
}

pub fn cross_eval(config: &RunConfig, features: Option<&Path>) -> Result<(), CliError> {
    let matrix = load_features(config, features)?;
    let cells: Vec<CrossCell> = cross_condition_grid(
        &matrix,
        &TrainSource::ALL,
        &Condition::ALL,
        &config.split,
        &config.forest_params(),
    )?;
    let out = Output::new(config);
    out.write_report(&format!("{REPORTS_DIR}/cross_condition.json"), "cross_condition", config, &cells)?;
    let table = cross_condition_table(&cells);
    out.write_table(&format!("{TABLES_DIR}/cross_condition"), &table)?;
    print!("{}", table.to_text());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.6e}"))
}

fn anova_rows(table: &mut Table, scope: &str, entries: &[&AnovaEntry]) {
    for e in entries {
        table.push(vec![
            scope.to_string(),
            e.name.clone(),
            fmt_opt(e.f_statistic),
            e.df_between.to_string(),
            e.df_within.to_string(),
            fmt_opt(e.p_value),
            if e.zero_within_variance { "zero within-group variance".into() } else { String::new() },
        ]);
    }
}

pub fn anova(config: &RunConfig, features: Option<&Path>) -> Result<(), CliError> {
    let matrix = load_features(config, features)?;
    let mut results: BTreeMap<String, AnovaReport> = BTreeMap::new();
    results.insert("all".into(), anova_f(&matrix)?);
    for c in matrix.conditions() {
        results.insert(c.to_string(), anova_f(&matrix.for_condition(c))?);
    }
    let out = Output::new(config);
    out.write_report(&format!("{REPORTS_DIR}/anova.json"), "anova", config, &results)?;
    let mut table = Table::new(
        "One-way ANOVA by user",
        &["scope", "feature", "f_statistic", "df_between", "df_within", "p_value", "note"],
    );
    for (scope, r) in &results {
        let entries: Vec<&AnovaEntry> = std::iter::once(&r.pooled).chain(&r.per_feature).collect();
        anova_rows(&mut table, scope, &entries);
    }
    out.write_table(&format!("{TABLES_DIR}/anova"), &table)?;
    for (scope, r) in &results {
        println!(
            "{scope}: pooled F = {} (df {}, {}), p = {}",
            fmt_opt(r.pooled.f_statistic),
            r.pooled.df_between,
            r.pooled.df_within,
            fmt_opt(r.pooled.p_value)
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    /// Conditions to rank (default: every condition present).
    #[arg(long, value_delimiter = ',')]
    pub condition: Vec<Condition>,
    /// Rows in the printed table.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceResult {
    pub condition: Condition,
    pub depth: usize,
    /// Every feature, most important first.
    pub ranked: Vec<(String, f64)>,
    /// Importance summed per statistic, signal and channel.
    pub by_stat: BTreeMap<String, f64>,
    pub by_signal: BTreeMap<String, f64>,
    pub by_channel: BTreeMap<String, f64>,
}

pub fn importance(args: &ImportanceArgs, config: &RunConfig, features: Option<&Path>) -> Result<(), CliError> {
    let matrix = load_features(config, features)?;
    let conditions = crate::conditions_or_present(&args.condition, matrix.conditions());
    let out = Output::new(config);
    for condition in conditions {
        let (train, _) = split_matrix(&matrix.for_condition(condition), &config.split)?;
        let forest = train_forest(&train, &config.forest_params())?;
        let ranked = forest.ranked_importance();
        let mut result = ImportanceResult {
            condition,
            depth: config.forest.max_depth,
            ranked: ranked.clone(),
            by_stat: BTreeMap::new(),
            by_signal: BTreeMap::new(),
            by_channel: BTreeMap::new(),
        };
        for (name, v) in &ranked {
            let id: FeatureId = name.parse().map_err(|_| CliError::Internal(format!("bad feature name {name}")))?;
            *result.by_stat.entry(id.stat.to_string()).or_insert(0.0) += v;
            *result.by_signal.entry(id.signal.to_string()).or_insert(0.0) += v;
            *result.by_channel.entry(id.channel.to_string()).or_insert(0.0) += v;
        }
        out.write_report(&format!("{REPORTS_DIR}/importance_{condition}.json"), "importance", config, &result)?;
        let mut table = Table::new(format!("Feature importance ({condition})"), &["rank", "feature", "importance"]);
        for (i, (name, v)) in ranked.iter().take(args.top).enumerate() {
            table.push(vec![(i + 1).to_string(), name.clone(), format!("{v:.6}")]);
        }
        out.write_table(&format!("{TABLES_DIR}/importance_{condition}"), &table)?;
        print!("{}", table.to_text());
    }
    Ok(())
}

/// Loads the ablation rows written by `ablate`, if present.
pub fn read_ablation(path: &Path) -> Result<Vec<AblationRow>, CliError> {
    Ok(crate::output::read_report::<Vec<AblationRow>>(path)?.result)
}
