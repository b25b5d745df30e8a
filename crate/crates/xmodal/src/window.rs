//! Sliding-window inference over time-stamped feature tracks.

use perdyn_core::{snapshot_series, Real, TraitTrajectory, TraitVector, WindowConfig};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::mat::Mat;
use crate::model::{forward, ModalitySequence};
use crate::params::{Modality, ModelParams};

/// Slack when comparing window edges with the recording end.
const EDGE_TOL: f64 = 1e-9;

/// Frames of one modality: row `i` of `features` starts at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTrack<T> {
    pub modality: Modality,
    times: Vec<f64>,
    features: Mat<T>,
}

impl<T: Real> FeatureTrack<T> {
    pub fn new(modality: Modality, times: Vec<f64>, features: Mat<T>) -> Result<Self> {
        if times.len() != features.rows() {
            return Err(invalid(format!(
                "{modality}: {} timestamps for {} feature rows",
                times.len(),
                features.rows()
            )));
        }
        if times.is_empty() {
            return Err(invalid(format!("{modality}: no frames")));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(format!("{modality}: frame times must be finite and strictly increasing")));
        }
        if !features.is_finite() {
            return Err(invalid(format!("{modality}: non-finite feature value")));
        }
        Ok(Self {
            modality,
            times,
            features,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn features(&self) -> &Mat<T> {
        &self.features
    }

    /// Smallest gap between consecutive frames, 0 for a single frame.
    fn frame_step(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).reduce(f64::min).unwrap_or(0.0)
    }

    /// Frames with start time in `[from, to)`.
    fn slice(&self, from: f64, to: f64) -> Option<ModalitySequence<T>> {
        let lo = self.times.partition_point(|&t| t < from);
        let hi = self.times.partition_point(|&t| t < to);
        if lo == hi {
            return None;
        }
        let idx: Vec<usize> = (lo..hi).collect();
        ModalitySequence::new(self.modality, self.features.select_rows(&idx)).ok()
    }
}

/// Start time and length of the recording covered by `tracks`: from the
/// earliest frame to the end of the latest one, each frame lasting its
/// track's smallest frame step.
pub fn recording_span<T: Real>(tracks: &[FeatureTrack<T>; 3]) -> (f64, f64) {
    let start = tracks.iter().map(|t| t.times[0]).fold(f64::INFINITY, f64::min);
    let end = tracks
        .iter()
        .map(|t| t.times[t.times.len() - 1] + t.frame_step())
        .fold(f64::NEG_INFINITY, f64::max);
    (start, end - start)
}

fn check_tracks<T: Real>(tracks: &[FeatureTrack<T>; 3]) -> Result<()> {
    for (t, m) in tracks.iter().zip(Modality::ALL) {
        if t.modality != m {
            return Err(invalid(format!("expected {m} track in position {}, got {}", m.index(), t.modality)));
        }
    }
    Ok(())
}

/// One prediction per stride: the window `[s, s + window_s)` for every
/// start `s` on the stride grid from the recording start whose window ends
/// within the recording. Windows in which some modality has no frames are
/// skipped, leaving a gap.
pub fn window_predictions<T: Real>(
    tracks: &[FeatureTrack<T>; 3],
    params: &ModelParams<T>,
    cfg: &WindowConfig,
) -> Result<Vec<(f64, TraitVector<T>)>> {
    cfg.validate()?;
    check_tracks(tracks)?;
    let (t0, duration) = recording_span(tracks);
    let n = if duration + EDGE_TOL < cfg.window_s {
        0
    } else {
        ((duration - cfg.window_s + EDGE_TOL) / cfg.stride_s).floor() as usize + 1
    };
    let out: Vec<Option<(f64, TraitVector<T>)>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let start = t0 + k as f64 * cfg.stride_s;
            let end = start + cfg.window_s;
            let parts: Option<Vec<ModalitySequence<T>>> = tracks.iter().map(|t| t.slice(start, end)).collect();
            let Some(parts) = parts else {
                return Ok(None);
            };
            let inputs: [ModalitySequence<T>; 3] = parts.try_into().expect("three modalities");
            Ok(Some((start, forward(&inputs, params)?)))
        })
        .collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}

/// Per-stride predictions averaged into snapshots. Snapshots that would
/// extend past the end of the recording are dropped, so a gapless
/// recording of `D` seconds yields `floor(D / snapshot_s)` snapshots.
pub fn trait_trajectory<T: Real>(
    participant_id: &str,
    tracks: &[FeatureTrack<T>; 3],
    params: &ModelParams<T>,
    cfg: &WindowConfig,
) -> Result<TraitTrajectory<T>> {
    let preds = window_predictions(tracks, params, cfg)?;
    let (t0, duration) = recording_span(tracks);
    let series = snapshot_series(participant_id, &preds, cfg)?;
    let kept: Vec<(f64, TraitVector<T>)> = series
        .samples()
        .iter()
        .filter(|(s, _)| s + cfg.snapshot_s <= t0 + duration + EDGE_TOL)
        .copied()
        .collect();
    Ok(TraitTrajectory::new(participant_id, kept)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelShape;

    fn params() -> ModelParams<f64> {
        let shape = ModelShape {
            d: 4,
            heads: 2,
            layers: 1,
            input_dims: [2, 3, 1],
        };
        ModelParams::init(shape, 1).unwrap()
    }

    fn constant_tracks(seconds: usize) -> [FeatureTrack<f64>; 3] {
        let dims = [2, 3, 1];
        std::array::from_fn(|i| {
            let times = (0..seconds).map(|t| t as f64).collect();
            FeatureTrack::new(Modality::ALL[i], times, Mat::filled(seconds, dims[i], 0.3)).unwrap()
        })
    }

    #[test]
    fn constant_features_give_constant_rows() {
        let tr = trait_trajectory("p", &constant_tracks(75), &params(), &WindowConfig::default()).unwrap();
        assert_eq!(tr.len(), 2);
        let first = tr.samples()[0].1;
        assert!(tr.samples().iter().all(|(_, v)| *v == first));
    }

    #[test]
    fn snapshot_count_is_floor_of_duration() {
        let cfg = WindowConfig::default();
        for d in [30, 45, 59, 60, 61, 90, 121] {
            let tr = trait_trajectory("p", &constant_tracks(d), &params(), &cfg).unwrap();
            assert_eq!(tr.len(), d / 30, "duration {d}");
        }
        let tr = trait_trajectory("p", &constant_tracks(10), &params(), &cfg).unwrap();
        assert!(tr.is_empty());
    }

    #[test]
    fn silent_modality_leaves_gap() {
        let mut tracks = constant_tracks(40);
        let times: Vec<f64> = (0..40).filter(|t| !(5..25).contains(t)).map(|t| t as f64).collect();
        let n = times.len();
        tracks[1] = FeatureTrack::new(Modality::Textual, times, Mat::filled(n, 3, 0.3)).unwrap();
        let preds = window_predictions(&tracks, &params(), &WindowConfig::default()).unwrap();
        // windows [s, s + 15) with s in 0..=25; those inside the silence are skipped
        let starts: Vec<f64> = preds.iter().map(|p| p.0).collect();
        assert!(!starts.contains(&10.0));
        assert!(starts.contains(&0.0) && starts.contains(&25.0));
    }
}
