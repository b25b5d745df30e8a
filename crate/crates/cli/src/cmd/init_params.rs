use std::path::PathBuf;

use clap::Args;
use perdyn_xmodal::store::to_bytes;
use perdyn_xmodal::{Inventory, ModelParams64, ModelShape, Modality};
use serde::Serialize;

use crate::error::Result;
use crate::report::{sidecar_path, write_file, FileDigest, Manifest, Report};

#[derive(Debug, Clone, Args, Serialize)]
pub struct InitParamsArgs {
    #[arg(long, default_value_t = ModelShape::default().d)]
    pub d: usize,
    #[arg(long, default_value_t = ModelShape::default().heads)]
    pub heads: usize,
    /// Self-attention layers per fusion stack and blocks per cross stack.
    #[arg(long, default_value_t = ModelShape::default().layers)]
    pub layers: usize,
    #[arg(long, default_value_t = Modality::Acoustic.default_dim())]
    pub acoustic_dim: usize,
    #[arg(long, default_value_t = Modality::Textual.default_dim())]
    pub textual_dim: usize,
    #[arg(long, default_value_t = Modality::Visual.default_dim())]
    pub visual_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parameter file to write.
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InitResults {
    pub output: FileDigest,
    pub shape: ModelShape,
    pub inventory: Inventory,
}

pub fn run(args: &InitParamsArgs) -> Result<Report<InitResults>> {
    let shape = ModelShape {
        d: args.d,
        heads: args.heads,
        layers: args.layers,
        input_dims: [args.acoustic_dim, args.textual_dim, args.visual_dim],
    };
    let params = ModelParams64::init(shape, args.seed)?;
    let bytes = to_bytes(&params)?;
    write_file(&args.output, &bytes)?;
    let results = InitResults {
        output: FileDigest::of_bytes(&args.output, &bytes),
        shape,
        inventory: params.inventory(),
    };
    let report = Report::new(Manifest::new("init-params", args, Some(args.seed), vec![])?, vec![], results)?;
    let sidecar = args.manifest.clone().unwrap_or_else(|| sidecar_path(&args.output));
    write_file(&sidecar, report.to_json()?.as_bytes())?;
    Ok(report)
}
