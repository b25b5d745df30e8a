//! Synthetic sessions with a controlled group effect.
//!
//! Trait trajectories are drawn hierarchically: a global mean of 0.5 per
//! trait, group offsets with `sigma_between`, member offsets with
//! `sigma_within`, and AR(1) snapshot noise around each member mean. Values
//! are clipped to `[0, 1]`. `sigma_between = 0` is the null regime in which
//! group labels carry no information about member traits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::io::{PredictionRecord, RatingRecord};
use crate::session::{SessionRow, SessionTable};
use crate::trajectory::TraitTrajectory;
use crate::traits::{Trait, TraitVector};

/// Scale of the planted performance signal, see [`performance_signal`].
pub const PERFORMANCE_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_groups: usize,
    pub group_size_min: usize,
    pub group_size_max: usize,
    pub session_length_s: f64,
    pub snapshot_s: f64,
    pub sigma_between: f64,
    pub sigma_within: f64,
    pub sigma_time: f64,
    pub ar_coefficient: f64,
    pub missing_fraction: f64,
    pub performance_noise_std: f64,
    /// One session per group and task. Empty means a single unlabelled
    /// session per group.
    pub tasks: Vec<String>,
    /// Std of an additive per-(group, task) offset.
    pub sigma_task: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_groups: 17,
            group_size_min: 3,
            group_size_max: 4,
            session_length_s: 600.0,
            snapshot_s: 30.0,
            sigma_between: 0.05,
            sigma_within: 0.05,
            sigma_time: 0.02,
            ar_coefficient: 0.8,
            missing_fraction: 0.0,
            performance_noise_std: 0.5,
            tasks: Vec::new(),
            sigma_task: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_groups == 0 {
            return Err(validation("n_groups must be at least 1"));
        }
        if self.group_size_min < 2 || self.group_size_max < self.group_size_min {
            return Err(validation("group size range must satisfy 2 <= min <= max"));
        }
        if !(self.snapshot_s > 0.0) || !self.session_length_s.is_finite() {
            return Err(validation("snapshot_s must be positive and session length finite"));
        }
        if self.session_length_s < self.snapshot_s {
            return Err(validation(format!(
                "session length {} s is shorter than one snapshot ({} s)",
                self.session_length_s, self.snapshot_s
            )));
        }
        let stds = [
            ("sigma_between", self.sigma_between),
            ("sigma_within", self.sigma_within),
            ("sigma_time", self.sigma_time),
            ("sigma_task", self.sigma_task),
            ("performance_noise_std", self.performance_noise_std),
        ];
        for (name, s) in stds {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(validation(format!("{name} must be a finite non-negative number")));
            }
        }
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return Err(validation("ar_coefficient must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.missing_fraction) {
            return Err(validation("missing_fraction must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn snapshots_per_session(&self) -> usize {
        (self.session_length_s / self.snapshot_s).floor() as usize
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn offset5(rng: &mut ChaCha8Rng, base: &[f64; 5], sigma: f64) -> [f64; 5] {
    let mut out = *base;
    for x in &mut out {
        *x += sigma * normal(rng);
    }
    out
}

/// Indices to drop: `round(fraction * n)` snapshots (at most `n - 1`) taken
/// as whole contiguous runs, the last run possibly shortened.
fn missing_indices(rng: &mut ChaCha8Rng, n: usize, fraction: f64) -> Vec<bool> {
    let mut missing = vec![false; n];
    let target = ((fraction * n as f64).round() as usize).min(n.saturating_sub(1));
    if target == 0 {
        return missing;
    }
    let run = (n / 10).max(1);
    let mut runs: Vec<usize> = (0..n.div_ceil(run)).collect();
    runs.shuffle(rng);
    let mut removed = 0;
    for r in runs {
        for i in (r * run)..((r + 1) * run).min(n) {
            if removed == target {
                return missing;
            }
            missing[i] = true;
            removed += 1;
        }
    }
    missing
}

/// The declared performance function: ten times the summed deviation of
/// group-mean openness, extraversion and conscientiousness from 0.5.
pub fn performance_signal(group_mean: &TraitVector<f64>) -> f64 {
    PERFORMANCE_SCALE
        * (group_mean.openness() + group_mean.extraversion() + group_mean.conscientiousness() - 1.5)
}

/// Generates a session table with a performance score per group.
pub fn gen_sessions(cfg: &SynthConfig) -> Result<SessionTable<f64>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_snap = cfg.snapshots_per_session();
    let stationary_sd = cfg.sigma_time / (1.0 - cfg.ar_coefficient * cfg.ar_coefficient).sqrt();
    let tasks: Vec<Option<&str>> = if cfg.tasks.is_empty() {
        vec![None]
    } else {
        cfg.tasks.iter().map(|t| Some(t.as_str())).collect()
    };
    let width = cfg.n_groups.to_string().len().max(2);

    let mut rows = Vec::new();
    for g in 0..cfg.n_groups {
        let group_id = format!("g{g:0width$}");
        let group_mean = offset5(&mut rng, &[0.5; 5], cfg.sigma_between);
        let size = rng.random_range(cfg.group_size_min..=cfg.group_size_max);
        let members: Vec<[f64; 5]> = (0..size)
            .map(|_| offset5(&mut rng, &group_mean, cfg.sigma_within))
            .collect();
        for task in &tasks {
            let task_offset = offset5(&mut rng, &[0.0; 5], cfg.sigma_task);
            let session_id = match task {
                Some(t) => format!("{group_id}_{t}"),
                None => group_id.clone(),
            };
            for (m, member_mean) in members.iter().enumerate() {
                let participant_id = format!("{group_id}p{m}");
                let missing = missing_indices(&mut rng, n_snap, cfg.missing_fraction);
                let mut noise = offset5(&mut rng, &[0.0; 5], stationary_sd);
                let mut samples = Vec::with_capacity(n_snap);
                for (i, &skip) in missing.iter().enumerate() {
                    if i > 0 {
                        for e in &mut noise {
                            *e = cfg.ar_coefficient * *e + cfg.sigma_time * normal(&mut rng);
                        }
                    }
                    if skip {
                        continue;
                    }
                    let mut s = [0.0; 5];
                    for k in 0..5 {
                        s[k] = (member_mean[k] + task_offset[k] + noise[k]).clamp(0.0, 1.0);
                    }
                    samples.push((i as f64 * cfg.snapshot_s, TraitVector::from_array(s)?));
                }
                rows.push(SessionRow {
                    group_id: group_id.clone(),
                    session_id: session_id.clone(),
                    task_label: task.map(str::to_string),
                    trajectory: TraitTrajectory::new(participant_id, samples)?,
                });
            }
        }
    }

    let table = SessionTable::new(rows)?;
    let mut perf = BTreeMap::new();
    for (g, mean) in table.group_averages(None) {
        perf.insert(g, performance_signal(&mean) + cfg.performance_noise_std * normal(&mut rng));
    }
    table.with_performance(perf)
}

/// Self reports drawn uniformly from `[0, 1]` independently of the perceived
/// traits, one per participant of `table`.
pub fn gen_independent_self_reports(table: &SessionTable<f64>, seed: u64) -> BTreeMap<String, TraitVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<&str> = table.rows().iter().map(|r| r.participant_id()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .map(|p| {
            let s: [f64; 5] = std::array::from_fn(|_| rng.random::<f64>());
            (p.to_string(), TraitVector::from_array(s).expect("unit interval"))
        })
        .collect()
}

/// Observer ratings and model predictions around each participant's
/// session-averaged perceived traits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSynthConfig {
    pub n_raters: usize,
    pub rater_noise_std: f64,
    pub model_noise_std: f64,
    pub seed: u64,
}

impl Default for RatingSynthConfig {
    fn default() -> Self {
        Self {
            n_raters: 8,
            rater_noise_std: 0.1,
            model_noise_std: 0.1,
            seed: 0,
        }
    }
}

/// One rating per (rater, participant, trait) and one prediction per
/// (participant, trait), each the participant's average plus independent
/// Gaussian noise, clipped to `[0, 1]`. Rater ids are `r1..rN`.
pub fn gen_ratings(
    table: &SessionTable<f64>,
    cfg: &RatingSynthConfig,
) -> Result<(Vec<RatingRecord>, Vec<PredictionRecord>)> {
    if cfg.n_raters < 2 {
        return Err(validation("at least two raters required"));
    }
    for (name, s) in [("rater_noise_std", cfg.rater_noise_std), ("model_noise_std", cfg.model_noise_std)] {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(validation(format!("{name} must be a finite non-negative number")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let subjects: Vec<(String, TraitVector<f64>)> = table
        .participant_averages(None)
        .into_values()
        .flatten()
        .collect();
    let mut ratings = Vec::new();
    let mut predictions = Vec::new();
    for (subject, v) in &subjects {
        for t in Trait::ALL {
            for r in 1..=cfg.n_raters {
                ratings.push(RatingRecord {
                    rater_id: format!("r{r}"),
                    subject_id: subject.clone(),
                    trait_name: t.name().to_string(),
                    score: (v.get(t) + cfg.rater_noise_std * normal(&mut rng)).clamp(0.0, 1.0),
                });
            }
            predictions.push(PredictionRecord {
                subject_id: subject.clone(),
                trait_name: t.name().to_string(),
                score: (v.get(t) + cfg.model_noise_std * normal(&mut rng)).clamp(0.0, 1.0),
            });
        }
    }
    Ok((ratings, predictions))
}
