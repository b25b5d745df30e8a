pub mod agreement;
pub mod cluster;
pub mod init_params;
pub mod predict;
pub mod synth;
pub mod tasks;
pub mod traits;

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use perdyn_core::io::read_trait_windows;
use perdyn_core::{SessionTable, TraitSet};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::report::FileDigest;

/// Reads a file once, returning its bytes and digest.
pub(crate) fn read_input(path: &Path) -> Result<(Vec<u8>, FileDigest)> {
    let bytes = fs::read(path).map_err(|e| CliError::from(e).context(path.display()))?;
    let digest = FileDigest::of_bytes(path, &bytes);
    Ok((bytes, digest))
}

pub(crate) fn load_table(path: &Path) -> Result<(SessionTable<f64>, FileDigest)> {
    let (bytes, digest) = read_input(path)?;
    let table = read_trait_windows(bytes.as_slice()).map_err(|e| CliError::from(e).context(path.display()))?;
    Ok((table, digest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TraitsFlag {
    Big5,
    Meta,
}

impl From<TraitsFlag> for TraitSet {
    fn from(t: TraitsFlag) -> Self {
        match t {
            TraitsFlag::Big5 => TraitSet::Big5,
            TraitsFlag::Meta => TraitSet::Meta,
        }
    }
}
