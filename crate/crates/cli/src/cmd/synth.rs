use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use perdyn_core::io::{write_performance, write_predictions, write_ratings, write_self_reports, write_trait_windows};
use perdyn_core::synth::{gen_independent_self_reports, gen_ratings, gen_sessions, RatingSynthConfig, SynthConfig};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::report::{sidecar_path, write_file, FileDigest, Manifest, Report};

fn d() -> SynthConfig {
    SynthConfig::default()
}

fn r() -> RatingSynthConfig {
    RatingSynthConfig::default()
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = d().n_groups)]
    pub n_groups: usize,
    #[arg(long, default_value_t = d().group_size_min)]
    pub group_size_min: usize,
    #[arg(long, default_value_t = d().group_size_max)]
    pub group_size_max: usize,
    /// Session length in seconds.
    #[arg(long, default_value_t = d().session_length_s)]
    pub session_length: f64,
    #[arg(long, default_value_t = d().snapshot_s)]
    pub snapshot: f64,
    /// Std of group offsets; 0 is the null regime.
    #[arg(long, default_value_t = d().sigma_between)]
    pub sigma_between: f64,
    #[arg(long, default_value_t = d().sigma_within)]
    pub sigma_within: f64,
    /// AR(1) innovation std of the snapshot noise.
    #[arg(long, default_value_t = d().sigma_time)]
    pub sigma_time: f64,
    #[arg(long, default_value_t = d().ar_coefficient)]
    pub ar_coefficient: f64,
    #[arg(long, default_value_t = d().missing_fraction)]
    pub missing_fraction: f64,
    #[arg(long, default_value_t = d().performance_noise_std)]
    pub performance_noise: f64,
    /// Comma-separated task labels, one session per group and task.
    #[arg(long, value_delimiter = ',')]
    pub tasks: Vec<String>,
    #[arg(long, default_value_t = d().sigma_task)]
    pub sigma_task: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trait-window CSV.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Per-group performance CSV.
    #[arg(long)]
    pub performance: Option<PathBuf>,
    /// Self reports drawn independently of the perceived traits (seed + 1).
    #[arg(long)]
    pub self_reports: Option<PathBuf>,
    /// Rater scores per participant and trait (seed + 2). Requires
    /// `--predictions`.
    #[arg(long, requires = "predictions")]
    pub ratings: Option<PathBuf>,
    /// Model predictions matching `--ratings`.
    #[arg(long, requires = "ratings")]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value_t = r().n_raters)]
    pub raters: usize,
    #[arg(long, default_value_t = r().rater_noise_std)]
    pub rater_noise: f64,
    #[arg(long, default_value_t = r().model_noise_std)]
    pub model_noise: f64,
    /// Manifest location; defaults to `<output>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl SynthArgs {
    pub fn config(&self) -> SynthConfig {
        SynthConfig {
            n_groups: self.n_groups,
            group_size_min: self.group_size_min,
            group_size_max: self.group_size_max,
            session_length_s: self.session_length,
            snapshot_s: self.snapshot,
            sigma_between: self.sigma_between,
            sigma_within: self.sigma_within,
            sigma_time: self.sigma_time,
            ar_coefficient: self.ar_coefficient,
            missing_fraction: self.missing_fraction,
            performance_noise_std: self.performance_noise,
            tasks: self.tasks.clone(),
            sigma_task: self.sigma_task,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DataOutputs {
    pub outputs: Vec<FileDigest>,
    pub counts: BTreeMap<String, usize>,
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> perdyn_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn run(args: &SynthArgs) -> Result<Report<DataOutputs>> {
    let cfg = args.config();
    let table = gen_sessions(&cfg)?;
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let mut counts = BTreeMap::new();
    counts.insert("groups".to_string(), table.group_ids().len());
    counts.insert("session_rows".to_string(), table.rows().len());
    counts.insert(
        "snapshots".to_string(),
        table.rows().iter().map(|r| r.trajectory.len()).sum(),
    );
    files.push((args.output.clone(), csv_bytes(|b| write_trait_windows(&table, b))?));
    if let Some(p) = &args.performance {
        files.push((p.clone(), csv_bytes(|b| write_performance(table.performance(), b))?));
    }
    if let Some(p) = &args.self_reports {
        let reports = gen_independent_self_reports(&table, args.seed.wrapping_add(1));
        counts.insert("self_reports".to_string(), reports.len());
        files.push((p.clone(), csv_bytes(|b| write_self_reports(&reports, b))?));
    }
    if let (Some(rp), Some(pp)) = (&args.ratings, &args.predictions) {
        let rcfg = RatingSynthConfig {
            n_raters: args.raters,
            rater_noise_std: args.rater_noise,
            model_noise_std: args.model_noise,
            seed: args.seed.wrapping_add(2),
        };
        let (ratings, predictions) = gen_ratings(&table, &rcfg)?;
        counts.insert("ratings".to_string(), ratings.len());
        files.push((rp.clone(), csv_bytes(|b| write_ratings(&ratings, b))?));
        files.push((pp.clone(), csv_bytes(|b| write_predictions(&predictions, b))?));
    }
    for (path, _) in &files {
        if files.iter().filter(|(q, _)| q == path).count() > 1 {
            return Err(CliError::validation(format!("{} is given for two outputs", path.display())));
        }
    }
    let mut outputs = Vec::new();
    for (path, bytes) in &files {
        write_file(path, bytes)?;
        outputs.push(FileDigest::of_bytes(path, bytes));
    }
    let manifest = Manifest::new("synth", args, Some(args.seed), vec![])?;
    let report = Report::new(manifest, vec![], DataOutputs { outputs, counts })?;
    let sidecar = args.manifest.clone().unwrap_or_else(|| sidecar_path(&args.output));
    write_file(&sidecar, report.to_json()?.as_bytes())?;
    Ok(report)
}
