//! Perceived versus self-reported group traits as predictors of group
//! performance.

use std::collections::BTreeMap;

use perdyn_core::{group_average, SessionTable, TraitSet, TraitVector};
use serde::Serialize;

use crate::cv::{loo_cv, LooReport};
use crate::error::{invalid, Result};
use crate::gbt::GbtConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    Perceived,
    SelfReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictorRun {
    pub source: FeatureSource,
    pub representation: TraitSet,
    pub n_features: usize,
    pub report: LooReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// Group order of every design matrix and report.
    pub groups: Vec<String>,
    pub targets: Vec<f64>,
    pub runs: Vec<PredictorRun>,
}

impl Comparison {
    pub fn run(&self, source: FeatureSource, representation: TraitSet) -> Option<&PredictorRun> {
        self.runs
            .iter()
            .find(|r| r.source == source && r.representation == representation)
    }
}

/// Group means of member self-reports; every member of every group must
/// have one.
pub fn self_report_group_means(
    table: &SessionTable<f64>,
    reports: &BTreeMap<String, TraitVector<f64>>,
) -> Result<BTreeMap<String, TraitVector<f64>>> {
    let mut members: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in table.rows() {
        let list = members.entry(r.group_id.clone()).or_default();
        if !list.iter().any(|p| p == r.participant_id()) {
            list.push(r.participant_id().to_string());
        }
    }
    members
        .into_iter()
        .map(|(g, ps)| {
            let vs = ps
                .iter()
                .map(|p| {
                    reports
                        .get(p)
                        .copied()
                        .ok_or_else(|| invalid(format!("no self-report for participant {p} of group {g}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((g, group_average(&vs)?))
        })
        .collect()
}

/// Leave-one-out runs for {perceived, self-report} x {big five, meta
/// traits}. Without self-reports only the two perceived runs are made.
pub fn compare_predictors(
    table: &SessionTable<f64>,
    self_reports: Option<&BTreeMap<String, TraitVector<f64>>>,
    cfg: &GbtConfig,
    normalize_meta: bool,
) -> Result<Comparison> {
    let perceived = table.group_averages(None);
    let groups: Vec<String> = table.group_ids().into_iter().collect();
    let targets = groups
        .iter()
        .map(|g| {
            table
                .performance()
                .get(g)
                .copied()
                .ok_or_else(|| invalid(format!("no performance score for group {g}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if let Some(g) = groups.iter().find(|g| !perceived.contains_key(*g)) {
        return Err(invalid(format!("group {g} has no trait samples")));
    }

    let mut sources = vec![(FeatureSource::Perceived, perceived)];
    if let Some(reports) = self_reports {
        sources.push((FeatureSource::SelfReport, self_report_group_means(table, reports)?));
    }
    let mut runs = Vec::new();
    for (source, means) in &sources {
        for representation in [TraitSet::Big5, TraitSet::Meta] {
            let x: Vec<Vec<f64>> = groups
                .iter()
                .map(|g| representation.project(&means[g], normalize_meta))
                .collect();
            runs.push(PredictorRun {
                source: *source,
                representation,
                n_features: representation.dim(),
                report: loo_cv(&x, &targets, cfg)?,
            });
        }
    }
    Ok(Comparison { groups, targets, runs })
}
