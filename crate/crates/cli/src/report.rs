//! Report envelope shared by every command: manifest, warnings, results
//! and a checksum over the results.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of_file(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::from(e).context(path.display()))?;
        Ok(Self::of_bytes(path, &bytes))
    }

    pub fn of_bytes(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    /// UTC, RFC 3339. The only field allowed to differ between reruns.
    pub timestamp: String,
    pub seed: Option<u64>,
    /// Every option of the run with defaults filled in.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>, inputs: Vec<FileDigest>) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed,
            config: serde_json::to_value(config)?,
            inputs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

impl Warning {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<R> {
    pub manifest: Manifest,
    pub warnings: Vec<Warning>,
    pub results: R,
    /// SHA-256 of the compact JSON encoding of `results`.
    pub results_checksum: String,
}

impl<R: Serialize> Report<R> {
    pub fn new(manifest: Manifest, warnings: Vec<Warning>, results: R) -> Result<Self> {
        let results_checksum = sha256_hex(&serde_json::to_vec(&results)?);
        Ok(Self {
            manifest,
            warnings,
            results,
            results_checksum,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Flat view of a report's results for `--format csv`.
pub trait Tabular {
    fn header(&self) -> Vec<&'static str>;
    fn records(&self) -> Vec<Vec<String>>;
}

pub fn render_csv(table: &impl Tabular) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(table.header())?;
    for r in table.records() {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::validation(e.to_string()))
}

/// `<path>.manifest.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::from(e).context(path.display()))
}

/// Writes the report as JSON, or as CSV with the full JSON report in a
/// sidecar when the output is a file.
pub fn emit<R: Serialize + Tabular>(report: &Report<R>, output: Option<&Path>, format: Format) -> Result<()> {
    let json = report.to_json()?;
    match (format, output) {
        (Format::Json, Some(p)) => write_file(p, json.as_bytes()),
        (Format::Json, None) => write_stdout(json.as_bytes()),
        (Format::Csv, Some(p)) => {
            write_file(p, &render_csv(&report.results)?)?;
            write_file(&sidecar_path(p), json.as_bytes())
        }
        (Format::Csv, None) => write_stdout(&render_csv(&report.results)?),
    }
}

pub fn write_stdout(bytes: &[u8]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

/// p-values in the `p < .001` / `p = .023` style.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "p < .001".to_string()
    } else {
        let s = format!("{p:.3}");
        format!("p = {}", s.strip_prefix('0').unwrap_or(&s))
    }
}

pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        String::new()
    }
}
