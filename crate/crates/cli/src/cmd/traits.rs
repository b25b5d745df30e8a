use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use perdyn_core::io::write_trait_windows;
use perdyn_core::{SessionRow, SessionTable, Trait, TraitTrajectory, WindowConfig};
use perdyn_xmodal::store::from_bytes;
use perdyn_xmodal::{trait_trajectory, window_predictions, ModelParams64};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::features::{read_sessions, read_tracks};
use crate::report::{sidecar_path, write_file, FileDigest, Manifest, Report, Warning};

#[derive(Debug, Clone, Args, Serialize)]
pub struct TraitsArgs {
    /// Directory with `sessions.csv` and per-participant feature files.
    #[arg(long)]
    pub features: PathBuf,
    /// Parameter file written by `init-params`.
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, default_value_t = WindowConfig::default().window_s)]
    pub window: f64,
    #[arg(long, default_value_t = WindowConfig::default().stride_s)]
    pub stride: f64,
    #[arg(long, default_value_t = WindowConfig::default().snapshot_s)]
    pub snapshot: f64,
    /// Trait-window CSV of snapshots.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Optional CSV of per-stride predictions.
    #[arg(long)]
    pub windows: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraitsResults {
    pub outputs: Vec<FileDigest>,
    pub counts: BTreeMap<String, usize>,
}

pub fn run(args: &TraitsArgs) -> Result<Report<TraitsResults>> {
    let cfg = WindowConfig::new(args.window, args.stride, args.snapshot)?;
    let param_bytes = fs::read(&args.params).map_err(|e| CliError::from(e).context(args.params.display()))?;
    let params: ModelParams64 = from_bytes(&param_bytes).map_err(|e| CliError::from(e).context(args.params.display()))?;
    let (entries, sessions_digest) = read_sessions(&args.features)?;
    let mut inputs = vec![FileDigest::of_bytes(&args.params, &param_bytes), sessions_digest];
    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(entries.len());
    let mut stride_rows: Vec<csv::StringRecord> = Vec::new();
    for e in &entries {
        let (tracks, digests) = read_tracks(&args.features, e, params.shape.input_dims)?;
        inputs.extend(digests);
        let ctx = format!("session {}, participant {}", e.session_id, e.participant_id);
        let trajectory: TraitTrajectory<f64> =
            trait_trajectory(&e.participant_id, &tracks, &params, &cfg).map_err(|err| CliError::from(err).context(&ctx))?;
        if trajectory.is_empty() {
            warnings.push(Warning::new(
                "no_snapshots",
                format!("{ctx}: recording shorter than one snapshot"),
            ));
        }
        if args.windows.is_some() {
            for (t, v) in window_predictions(&tracks, &params, &cfg)? {
                let mut rec = vec![e.session_id.clone(), e.participant_id.clone(), t.to_string()];
                rec.extend(v.as_array().iter().map(f64::to_string));
                stride_rows.push(csv::StringRecord::from(rec));
            }
        }
        rows.push(SessionRow {
            group_id: e.group_id.clone(),
            session_id: e.session_id.clone(),
            task_label: (!e.task_label.is_empty()).then(|| e.task_label.clone()),
            trajectory,
        });
    }
    let table = SessionTable::new(rows)?;
    let mut snapshot_csv = Vec::new();
    write_trait_windows(&table, &mut snapshot_csv)?;
    write_file(&args.output, &snapshot_csv)?;
    let mut outputs = vec![FileDigest::of_bytes(&args.output, &snapshot_csv)];
    let mut counts = BTreeMap::new();
    counts.insert("participants".to_string(), entries.len());
    counts.insert(
        "snapshots".to_string(),
        table.rows().iter().map(|r| r.trajectory.len()).sum(),
    );
    if let Some(p) = &args.windows {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["session_id", "participant_id", "t_start_s"];
        header.extend(Trait::ALL.map(Trait::name));
        w.write_record(header)?;
        for r in &stride_rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::validation(e.to_string()))?;
        write_file(p, &bytes)?;
        outputs.push(FileDigest::of_bytes(p, &bytes));
        counts.insert("windows".to_string(), stride_rows.len());
    }
    let manifest = Manifest::new("traits", args, None, inputs)?;
    let report = Report::new(manifest, warnings, TraitsResults { outputs, counts })?;
    let sidecar = args.manifest.clone().unwrap_or_else(|| sidecar_path(&args.output));
    write_file(&sidecar, report.to_json()?.as_bytes())?;
    Ok(report)
}
