//! Feature directory layout read by `perdyn traits`.
//!
//! ```text
//! <dir>/sessions.csv                       group_id,session_id,task_label,participant_id
//! <dir>/<session_id>/<participant_id>/acoustic.csv
//! <dir>/<session_id>/<participant_id>/textual.csv
//! <dir>/<session_id>/<participant_id>/visual.csv
//! ```
//!
//! Each feature file has a `t_s` column followed by one column per feature.

use std::fs;
use std::path::{Path, PathBuf};

use perdyn_xmodal::{FeatureTrack64, Mat64, Modality};
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::report::FileDigest;

pub const SESSIONS_FILE: &str = "sessions.csv";

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct SessionEntry {
    pub group_id: String,
    pub session_id: String,
    pub task_label: String,
    pub participant_id: String,
}

pub fn read_sessions(dir: &Path) -> Result<(Vec<SessionEntry>, FileDigest)> {
    let path = dir.join(SESSIONS_FILE);
    let digest = FileDigest::of_file(&path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&path)
        .map_err(|e| CliError::from(e).context(path.display()))?;
    let expected = ["group_id", "session_id", "task_label", "participant_id"];
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(CliError::validation(format!(
            "{}: header must be `{}`",
            path.display(),
            expected.join(",")
        )));
    }
    let entries: Vec<SessionEntry> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    if entries.is_empty() {
        return Err(CliError::validation(format!("{} lists no participants", path.display())));
    }
    Ok((entries, digest))
}

pub fn feature_path(dir: &Path, e: &SessionEntry, m: Modality) -> PathBuf {
    dir.join(&e.session_id).join(&e.participant_id).join(format!("{m}.csv"))
}

/// Loads the three tracks of one participant. `dims` are the feature
/// widths the parameters expect.
pub fn read_tracks(dir: &Path, e: &SessionEntry, dims: [usize; 3]) -> Result<([FeatureTrack64; 3], Vec<FileDigest>)> {
    let mut tracks = Vec::with_capacity(3);
    let mut digests = Vec::with_capacity(3);
    for m in Modality::ALL {
        let path = feature_path(dir, e, m);
        let who = format!(
            "session {}, participant {}, modality {m}",
            e.session_id, e.participant_id
        );
        let bytes = fs::read(&path)
            .map_err(|err| CliError::validation(format!("{who}: cannot read {}: {err}", path.display())))?;
        digests.push(FileDigest::of_bytes(&path, &bytes));
        tracks.push(parse_track(&bytes, m, dims[m.index()]).map_err(|err| err.context(&who))?);
    }
    let tracks: [FeatureTrack64; 3] = tracks.try_into().expect("three modalities");
    Ok((tracks, digests))
}

fn parse_track(bytes: &[u8], m: Modality, dim: usize) -> Result<FeatureTrack64> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("t_s") {
        return Err(CliError::validation("first column must be `t_s`"));
    }
    if header.len() != dim + 1 {
        return Err(CliError::validation(format!(
            "{} feature columns, the parameters expect {dim}",
            header.len() - 1
        )));
    }
    let mut times = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::validation(format!("row {}, column {}: `{field}` is not a number", i + 2, j + 1)))?;
            if j == 0 {
                times.push(v);
            } else {
                data.push(v);
            }
        }
    }
    let rows = times.len();
    Ok(FeatureTrack64::new(m, times, Mat64::new(rows, dim, data)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_track() {
        let t = parse_track(b"t_s,a,b\n0,1,2\n0.5,3,4\n", Modality::Visual, 2).unwrap();
        assert_eq!(t.times(), &[0.0, 0.5]);
        assert_eq!(t.features().row(1), &[3.0, 4.0]);
    }

    #[test]
    fn rejects_wrong_width_and_text() {
        assert!(parse_track(b"t_s,a\n0,1\n", Modality::Visual, 2).is_err());
        assert!(parse_track(b"t_s,a\n0,x\n", Modality::Visual, 1).is_err());
        assert!(parse_track(b"time,a\n0,1\n", Modality::Visual, 1).is_err());
    }
}
