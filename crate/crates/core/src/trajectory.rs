//! Window configuration and temporal aggregation: per-stride predictions to
//! snapshots, snapshots to session averages, members to group averages.

use serde::{Deserialize, Serialize};

use crate::error::{validation, CoreError, Result};
use crate::real::Real;
use crate::traits::TraitVector;

/// Tolerance used when checking that timestamps sit on the stride grid.
const GRID_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_s: f64,
    pub stride_s: f64,
    pub snapshot_s: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_s: 15.0,
            stride_s: 1.0,
            snapshot_s: 30.0,
        }
    }
}

impl WindowConfig {
    pub fn new(window_s: f64, stride_s: f64, snapshot_s: f64) -> Result<Self> {
        let cfg = Self {
            window_s,
            stride_s,
            snapshot_s,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.window_s.is_finite() && self.stride_s.is_finite() && self.snapshot_s.is_finite();
        if !finite || self.window_s <= 0.0 || self.stride_s <= 0.0 {
            return Err(validation("window_s and stride_s must be positive"));
        }
        if self.snapshot_s < self.stride_s {
            return Err(validation("snapshot_s must be at least stride_s"));
        }
        let ratio = self.snapshot_s / self.stride_s;
        if (ratio - ratio.round()).abs() > GRID_TOL {
            return Err(validation("snapshot_s must be an integer multiple of stride_s"));
        }
        Ok(())
    }

    /// Number of stride steps per snapshot.
    pub fn strides_per_snapshot(&self) -> usize {
        (self.snapshot_s / self.stride_s).round() as usize
    }
}

/// Time-indexed trait samples for one participant. Absent samples are gaps
/// (non-speaking intervals); sample times are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TraitTrajectory<T> {
    participant_id: String,
    samples: Vec<(f64, TraitVector<T>)>,
}

impl<T: Real> TraitTrajectory<T> {
    pub fn new(participant_id: impl Into<String>, samples: Vec<(f64, TraitVector<T>)>) -> Result<Self> {
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(validation(format!(
                    "sample times must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some((t, _)) = samples.iter().find(|(t, _)| !t.is_finite()) {
            return Err(validation(format!("non-finite sample time {t}")));
        }
        Ok(Self {
            participant_id: participant_id.into(),
            samples,
        })
    }

    pub fn empty(participant_id: impl Into<String>) -> Self {
        Self {
            participant_id: participant_id.into(),
            samples: Vec::new(),
        }
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn samples(&self) -> &[(f64, TraitVector<T>)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fails if any sample starts inside one of the half-open `[start, end)`
    /// silence intervals.
    pub fn check_silences(&self, silences: &[(f64, f64)]) -> Result<()> {
        for &(t, _) in &self.samples {
            if let Some(&(a, b)) = silences.iter().find(|&&(a, b)| t >= a && t < b) {
                return Err(validation(format!(
                    "participant {} has a sample at {t} s inside silence [{a}, {b})",
                    self.participant_id
                )));
            }
        }
        Ok(())
    }
}

/// Componentwise mean of trait vectors, clamped to the per-trait range of
/// the inputs so that rounding cannot leave the convex hull.
fn mean_vector<'a, T: Real, I>(items: I) -> Option<TraitVector<T>>
where
    I: IntoIterator<Item = &'a TraitVector<T>>,
{
    let mut sum = [T::zero(); 5];
    let mut lo = [T::infinity(); 5];
    let mut hi = [T::neg_infinity(); 5];
    let mut n = 0usize;
    for v in items {
        for (i, &x) in v.as_array().iter().enumerate() {
            sum[i] = sum[i] + x;
            lo[i] = lo[i].min(x);
            hi[i] = hi[i].max(x);
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let count = T::from_usize_lossy(n);
    let mut out = [T::zero(); 5];
    for i in 0..5 {
        out[i] = (sum[i] / count).max(lo[i]).min(hi[i]);
    }
    Some(TraitVector::from_array(out).expect("mean of valid vectors is valid"))
}

/// Averages per-stride predictions into snapshots.
///
/// The snapshot grid is anchored at the first prediction time. A snapshot
/// starting at `T` averages every prediction with `t` in
/// `[T, T + snapshot_s)`; snapshots without predictions are omitted.
pub fn snapshot_series<T: Real>(
    participant_id: &str,
    preds: &[(f64, TraitVector<T>)],
    cfg: &WindowConfig,
) -> Result<TraitTrajectory<T>> {
    cfg.validate()?;
    let Some(&(t0, _)) = preds.first() else {
        return Ok(TraitTrajectory::empty(participant_id));
    };
    let per_snapshot = cfg.strides_per_snapshot() as i64;

    // (snapshot index, member predictions), in time order
    let mut buckets: Vec<(i64, Vec<&TraitVector<T>>)> = Vec::new();
    let mut prev_step: Option<i64> = None;
    for (t, v) in preds {
        let offset = (t - t0) / cfg.stride_s;
        let step = offset.round();
        if (offset - step).abs() > GRID_TOL {
            return Err(validation(format!("prediction at {t} s is off the stride grid")));
        }
        let step = step as i64;
        if prev_step.is_some_and(|p| step <= p) {
            return Err(validation("prediction times must be strictly increasing"));
        }
        prev_step = Some(step);
        let idx = step.div_euclid(per_snapshot);
        match buckets.last_mut() {
            Some((last, members)) if *last == idx => members.push(v),
            _ => buckets.push((idx, vec![v])),
        }
    }

    let samples = buckets
        .into_iter()
        .map(|(idx, members)| {
            let start = t0 + idx as f64 * cfg.snapshot_s;
            (start, mean_vector(members).expect("bucket nonempty"))
        })
        .collect();
    TraitTrajectory::new(participant_id, samples)
}

/// Per-trait mean over the present snapshots of a trajectory. Every snapshot
/// carries equal weight.
pub fn session_average<T: Real>(tr: &TraitTrajectory<T>) -> Result<TraitVector<T>> {
    mean_vector(tr.samples().iter().map(|(_, v)| v)).ok_or_else(|| {
        CoreError::NoData(format!(
            "trajectory of participant {} has no samples",
            tr.participant_id()
        ))
    })
}

/// Componentwise mean over group members.
pub fn group_average<T: Real>(members: &[TraitVector<T>]) -> Result<TraitVector<T>> {
    mean_vector(members).ok_or_else(|| CoreError::NoData("group has no members".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tv(x: f64) -> TraitVector<f64> {
        TraitVector::splat(x).unwrap()
    }

    fn cfg(snapshot: f64) -> WindowConfig {
        WindowConfig::new(15.0, 1.0, snapshot).unwrap()
    }

    #[test]
    fn default_window_config() {
        let c = WindowConfig::default();
        assert_eq!((c.window_s, c.stride_s, c.snapshot_s), (15.0, 1.0, 30.0));
        assert_eq!(c.strides_per_snapshot(), 30);
    }

    #[test]
    fn invalid_window_configs() {
        assert!(WindowConfig::new(0.0, 1.0, 30.0).is_err());
        assert!(WindowConfig::new(15.0, 0.0, 30.0).is_err());
        assert!(WindowConfig::new(15.0, 2.0, 1.0).is_err());
        assert!(WindowConfig::new(15.0, 2.0, 5.0).is_err());
    }

    #[test]
    fn constant_predictions_give_constant_snapshots() {
        let v = TraitVector::new(0.1, 0.2, 0.3, 0.7, 0.9).unwrap();
        let preds: Vec<_> = (0..60).map(|t| (t as f64, v)).collect();
        let tr = snapshot_series("p", &preds, &cfg(30.0)).unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr.samples()[0], (0.0, v));
        assert_eq!(tr.samples()[1], (30.0, v));
    }

    #[test]
    fn ramp_mean() {
        let preds: Vec<_> = (0..30)
            .map(|i| {
                let o = i as f64 * 0.01;
                (i as f64, TraitVector::new(o, 0.5, 0.5, 0.5, 0.5).unwrap())
            })
            .collect();
        let tr = snapshot_series("p", &preds, &cfg(30.0)).unwrap();
        assert_eq!(tr.len(), 1);
        let brute: f64 = (0..30).map(|i| i as f64 * 0.01).sum::<f64>() / 30.0;
        assert!((brute - 0.145).abs() < 1e-12);
        assert!((tr.samples()[0].1.openness() - 0.145).abs() < 1e-12);
    }

    #[test]
    fn partial_coverage_snapshot() {
        let preds: Vec<_> = (0..10).map(|i| (i as f64, tv(i as f64 / 10.0))).collect();
        let tr = snapshot_series("p", &preds, &cfg(30.0)).unwrap();
        assert_eq!(tr.len(), 1);
        assert!((tr.samples()[0].1.openness() - 0.45).abs() < 1e-12);
    }

    #[test]
    fn gap_snapshots_are_absent() {
        let mut preds: Vec<_> = (0..30).map(|i| (i as f64, tv(0.2))).collect();
        preds.extend((90..100).map(|i| (i as f64, tv(0.6))));
        let tr = snapshot_series("p", &preds, &cfg(30.0)).unwrap();
        let times: Vec<f64> = tr.samples().iter().map(|s| s.0).collect();
        assert_eq!(times, vec![0.0, 90.0]);
    }

    #[test]
    fn grid_anchored_at_first_prediction() {
        let preds: Vec<_> = (7..67).map(|i| (i as f64, tv(0.5))).collect();
        let tr = snapshot_series("p", &preds, &cfg(30.0)).unwrap();
        let times: Vec<f64> = tr.samples().iter().map(|s| s.0).collect();
        assert_eq!(times, vec![7.0, 37.0]);
    }

    #[test]
    fn empty_predictions_empty_trajectory() {
        let tr = snapshot_series::<f64>("p", &[], &cfg(30.0)).unwrap();
        assert!(tr.is_empty());
        assert!(matches!(session_average(&tr), Err(CoreError::NoData(_))));
    }

    #[test]
    fn off_grid_and_unordered_rejected() {
        let preds = vec![(0.0, tv(0.1)), (1.5, tv(0.1))];
        assert!(snapshot_series("p", &preds, &cfg(30.0)).is_err());
        let preds = vec![(2.0, tv(0.1)), (1.0, tv(0.1))];
        assert!(snapshot_series("p", &preds, &cfg(30.0)).is_err());
    }

    #[test]
    fn session_average_cases() {
        let tr = TraitTrajectory::new("p", vec![(0.0, tv(0.3))]).unwrap();
        assert_eq!(session_average(&tr).unwrap(), tv(0.3));
        let tr = TraitTrajectory::new("p", vec![(0.0, tv(0.2)), (30.0, tv(0.4))]).unwrap();
        let avg = session_average(&tr).unwrap();
        for &x in avg.as_array() {
            assert!((x - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn session_average_with_gaps_matches_loop() {
        let vals = [0.11, 0.52, 0.93, 0.27];
        let times = [0.0, 30.0, 120.0, 300.0];
        let samples = times
            .iter()
            .zip(vals)
            .map(|(&t, v)| (t, TraitVector::new(v, 1.0 - v, v / 2.0, 0.5, v * v).unwrap()))
            .collect();
        let tr: TraitTrajectory<f64> = TraitTrajectory::new("p", samples).unwrap();
        let avg = session_average(&tr).unwrap();
        let mut o = 0.0f64;
        let mut es = 0.0f64;
        for v in vals {
            o += v;
            es += v * v;
        }
        assert!((avg.openness() - o / 4.0).abs() < 1e-15);
        assert!((avg.emotional_stability() - es / 4.0).abs() < 1e-15);
    }

    #[test]
    fn group_average_cases() {
        assert_eq!(group_average(&[tv(0.7)]).unwrap(), tv(0.7));
        assert_eq!(group_average(&[tv(0.0), tv(1.0)]).unwrap(), tv(0.5));
        let members = [tv(0.1), tv(0.4), tv(0.35), tv(0.9)];
        let brute = (0.1 + 0.4 + 0.35 + 0.9) / 4.0;
        assert!((group_average(&members).unwrap().agreeableness() - brute).abs() < 1e-15);
        assert!(group_average::<f64>(&[]).is_err());
    }

    #[test]
    fn trajectory_rejects_non_increasing() {
        assert!(TraitTrajectory::new("p", vec![(1.0, tv(0.1)), (1.0, tv(0.1))]).is_err());
    }

    #[test]
    fn silences_checked() {
        let tr = TraitTrajectory::new("p", vec![(0.0, tv(0.1)), (60.0, tv(0.1))]).unwrap();
        assert!(tr.check_silences(&[(30.0, 60.0)]).is_ok());
        assert!(tr.check_silences(&[(30.0, 61.0)]).is_err());
    }

    fn arb_preds() -> impl Strategy<Value = Vec<(f64, TraitVector<f64>)>> {
        prop::collection::vec((1u32..4, prop::array::uniform5(0.0f64..=1.0)), 1..120).prop_map(|steps| {
            let mut t = 0u32;
            steps
                .into_iter()
                .map(|(dt, s)| {
                    t += dt;
                    (t as f64, TraitVector::from_array(s).unwrap())
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn snapshots_within_input_range(preds in arb_preds()) {
            let tr = snapshot_series("p", &preds, &cfg(30.0)).unwrap();
            for (start, v) in tr.samples() {
                let members: Vec<_> = preds.iter().filter(|(t, _)| t >= start && *t < start + 30.0).collect();
                prop_assert!(!members.is_empty());
                for i in 0..5 {
                    let lo = members.iter().map(|(_, m)| m.as_array()[i]).fold(f64::INFINITY, f64::min);
                    let hi = members.iter().map(|(_, m)| m.as_array()[i]).fold(f64::NEG_INFINITY, f64::max);
                    let x = v.as_array()[i];
                    prop_assert!(lo <= x && x <= hi);
                }
            }
        }

        #[test]
        fn unit_snapshot_is_identity(preds in arb_preds()) {
            let tr = snapshot_series("p", &preds, &WindowConfig::new(15.0, 1.0, 1.0).unwrap()).unwrap();
            prop_assert_eq!(tr.samples(), &preds[..]);
        }

        #[test]
        fn averages_permutation_invariant(
            vs in prop::collection::vec(prop::array::uniform5(0.0f64..=1.0), 1..12),
            seed in any::<u64>(),
        ) {
            let members: Vec<_> = vs.iter().map(|s| TraitVector::from_array(*s).unwrap()).collect();
            let mut shuffled = members.clone();
            // deterministic rotation + reversal as the permutation
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = group_average(&members).unwrap();
            let b = group_average(&shuffled).unwrap();
            for i in 0..5 {
                prop_assert!((a.as_array()[i] - b.as_array()[i]).abs() < 1e-12);
            }
            let tr_a = TraitTrajectory::new("p", members.iter().enumerate().map(|(i, v)| (i as f64, *v)).collect()).unwrap();
            let tr_b = TraitTrajectory::new("p", shuffled.iter().enumerate().map(|(i, v)| (i as f64, *v)).collect()).unwrap();
            let sa = session_average(&tr_a).unwrap();
            let sb = session_average(&tr_b).unwrap();
            for i in 0..5 {
                prop_assert!((sa.as_array()[i] - sb.as_array()[i]).abs() < 1e-12);
            }
        }
    }
}
