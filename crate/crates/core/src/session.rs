//! Participants grouped into sessions and groups.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::real::Real;
use crate::trajectory::{group_average, session_average, TraitTrajectory};
use crate::traits::TraitVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SessionRow<T> {
    pub group_id: String,
    pub session_id: String,
    pub task_label: Option<String>,
    pub trajectory: TraitTrajectory<T>,
}

impl<T: Real> SessionRow<T> {
    pub fn participant_id(&self) -> &str {
        self.trajectory.participant_id()
    }
}

/// Validated collection of session rows plus optional per-group performance
/// scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SessionTable<T> {
    rows: Vec<SessionRow<T>>,
    performance: BTreeMap<String, f64>,
}

impl<T: Real> SessionTable<T> {
    /// Checks that `(session_id, participant_id)` pairs are unique, that each
    /// session maps to a single group and task, and that every group has at
    /// least two participants.
    pub fn new(rows: Vec<SessionRow<T>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut session_meta: BTreeMap<&str, (&str, Option<&str>)> = BTreeMap::new();
        let mut members: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for r in &rows {
            if !seen.insert((r.session_id.as_str(), r.participant_id())) {
                return Err(validation(format!(
                    "duplicate participant {} in session {}",
                    r.participant_id(),
                    r.session_id
                )));
            }
            let meta = (r.group_id.as_str(), r.task_label.as_deref());
            match session_meta.get(r.session_id.as_str()) {
                Some(&m) if m != meta => {
                    return Err(validation(format!(
                        "session {} has inconsistent group or task labels",
                        r.session_id
                    )))
                }
                _ => {
                    session_meta.insert(&r.session_id, meta);
                }
            }
            members.entry(&r.group_id).or_default().insert(r.participant_id());
        }
        if let Some((g, m)) = members.iter().find(|(_, m)| m.len() < 2) {
            return Err(validation(format!(
                "group {g} has {} participant(s); at least 2 required",
                m.len()
            )));
        }
        Ok(Self {
            rows,
            performance: BTreeMap::new(),
        })
    }

    pub fn with_performance(mut self, scores: BTreeMap<String, f64>) -> Result<Self> {
        let groups = self.group_ids();
        for (g, s) in &scores {
            if !s.is_finite() {
                return Err(validation(format!("performance score of group {g} is not finite")));
            }
        }
        // scores for unknown groups are ignored; they may cover other tasks
        self.performance = scores.into_iter().filter(|(g, _)| groups.contains(g)).collect();
        Ok(self)
    }

    pub fn rows(&self) -> &[SessionRow<T>] {
        &self.rows
    }

    pub fn performance(&self) -> &BTreeMap<String, f64> {
        &self.performance
    }

    pub fn group_ids(&self) -> BTreeSet<String> {
        self.rows.iter().map(|r| r.group_id.clone()).collect()
    }

    /// Distinct task labels in sorted order; rows without a label are skipped.
    pub fn task_labels(&self) -> Vec<String> {
        let set: BTreeSet<_> = self.rows.iter().filter_map(|r| r.task_label.clone()).collect();
        set.into_iter().collect()
    }

    /// Rows restricted to one task label (`None` selects every row).
    pub fn rows_for_task<'a>(&'a self, task: Option<&'a str>) -> impl Iterator<Item = &'a SessionRow<T>> + 'a {
        self.rows
            .iter()
            .filter(move |r| task.is_none() || r.task_label.as_deref() == task)
    }

    /// Session-averaged traits of every row with at least one sample, keyed
    /// by group then participant. Participants appearing in several sessions
    /// of the same group are averaged across all their snapshots.
    pub fn participant_averages(&self, task: Option<&str>) -> BTreeMap<String, BTreeMap<String, TraitVector<T>>> {
        let mut pooled: BTreeMap<(String, String), Vec<(f64, TraitVector<T>)>> = BTreeMap::new();
        for r in self.rows_for_task(task) {
            pooled
                .entry((r.group_id.clone(), r.participant_id().to_string()))
                .or_default()
                .extend(r.trajectory.samples().iter().copied());
        }
        let mut out: BTreeMap<String, BTreeMap<String, TraitVector<T>>> = BTreeMap::new();
        for ((g, p), samples) in pooled {
            if samples.is_empty() {
                continue;
            }
            let vs: Vec<_> = samples.into_iter().map(|(_, v)| v).collect();
            let avg = group_average(&vs).expect("nonempty");
            out.entry(g).or_default().insert(p, avg);
        }
        out
    }

    /// Group averages of the participant averages.
    pub fn group_averages(&self, task: Option<&str>) -> BTreeMap<String, TraitVector<T>> {
        self.participant_averages(task)
            .into_iter()
            .map(|(g, members)| {
                let vs: Vec<_> = members.into_values().collect();
                (g, group_average(&vs).expect("nonempty"))
            })
            .collect()
    }

    /// Session average per row, skipping rows without samples.
    pub fn row_averages(&self) -> Vec<(&SessionRow<T>, TraitVector<T>)> {
        self.rows
            .iter()
            .filter_map(|r| session_average(&r.trajectory).ok().map(|v| (r, v)))
            .collect()
    }
}
