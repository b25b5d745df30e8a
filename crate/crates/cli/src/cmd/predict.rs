use std::path::PathBuf;

use clap::Args;
use perdyn_core::io::{read_performance, read_self_reports};
use perdyn_predict::{compare_predictors, Comparison, GbtConfig, SPREAD_DEFINITION};
use serde::Serialize;

use super::{load_table, read_input};
use crate::error::{CliError, Result};
use crate::report::{fmt_num, Format, Manifest, Report, Tabular, Warning};

fn d() -> GbtConfig {
    GbtConfig::default()
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    /// Trait-window CSV.
    #[arg(long, short)]
    pub input: PathBuf,
    /// `group_id,performance_score`.
    #[arg(long)]
    pub performance: PathBuf,
    /// `participant_id` plus the five trait columns.
    #[arg(long)]
    pub self_reports: Option<PathBuf>,
    /// Min-max rescale each self-reported trait to [0, 1].
    #[arg(long)]
    pub rescale_self_reports: bool,
    #[arg(long, default_value_t = d().n_trees)]
    pub n_trees: usize,
    #[arg(long, default_value_t = d().max_depth)]
    pub max_depth: usize,
    #[arg(long, default_value_t = d().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = d().min_samples_leaf)]
    pub min_samples_leaf: usize,
    /// Recorded in the manifest; the boosted fit is deterministic.
    #[arg(long, default_value_t = d().seed)]
    pub seed: u64,
    #[arg(long)]
    pub normalize_meta: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub source: perdyn_predict::FeatureSource,
    pub representation: perdyn_core::TraitSet,
    /// `mean ± spread`.
    pub display: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictResults {
    pub gbt: GbtConfig,
    pub spread_definition: &'static str,
    pub comparison: Comparison,
    pub summary: Vec<RunSummary>,
}

impl Tabular for PredictResults {
    fn header(&self) -> Vec<&'static str> {
        vec!["source", "representation", "n_features", "mse_mean", "mse_spread"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.comparison
            .runs
            .iter()
            .map(|r| {
                vec![
                    snake(&r.source),
                    snake(&r.representation),
                    r.n_features.to_string(),
                    fmt_num(r.report.mse_mean),
                    fmt_num(r.report.mse_spread),
                ]
            })
            .collect()
    }
}

/// snake_case name of a unit enum, through its serde form.
fn snake<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn run(args: &PredictArgs) -> Result<Report<PredictResults>> {
    let (table, tdigest) = load_table(&args.input)?;
    let (pbytes, pdigest) = read_input(&args.performance)?;
    let scores = read_performance(pbytes.as_slice()).map_err(|e| CliError::from(e).context(args.performance.display()))?;
    let mut warnings = Vec::new();
    let groups = table.group_ids();
    let unknown = scores.keys().filter(|g| !groups.contains(*g)).count();
    if unknown > 0 {
        warnings.push(Warning::new(
            "unknown_groups",
            format!("{unknown} performance scores for groups absent from the trait data are ignored"),
        ));
    }
    let table = table.with_performance(scores)?;
    let mut inputs = vec![tdigest, pdigest];
    let reports = match &args.self_reports {
        Some(p) => {
            let (bytes, digest) = read_input(p)?;
            inputs.push(digest);
            Some(
                read_self_reports(bytes.as_slice(), args.rescale_self_reports)
                    .map_err(|e| CliError::from(e).context(p.display()))?,
            )
        }
        None => None,
    };
    let gbt = GbtConfig {
        n_trees: args.n_trees,
        max_depth: args.max_depth,
        learning_rate: args.learning_rate,
        min_samples_leaf: args.min_samples_leaf,
        seed: args.seed,
    };
    let comparison = compare_predictors(&table, reports.as_ref(), &gbt, args.normalize_meta)?;
    let summary = comparison
        .runs
        .iter()
        .map(|r| RunSummary {
            source: r.source,
            representation: r.representation,
            display: r.report.display(),
        })
        .collect();
    let manifest = Manifest::new("predict", args, Some(args.seed), inputs)?;
    Report::new(
        manifest,
        warnings,
        PredictResults {
            gbt,
            spread_definition: SPREAD_DEFINITION,
            comparison,
            summary,
        },
    )
}
