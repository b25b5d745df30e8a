use std::path::PathBuf;

use clap::{Args, ValueEnum};
use perdyn_core::{SessionTable, TraitSet};
use perdyn_stats::{encode_labels, permanova_with, PermanovaOptions, PermutationMode};
use serde::Serialize;

use super::{load_table, TraitsFlag};
use crate::error::Result;
use crate::report::{fmt_num, format_p, Format, Manifest, Report, Tabular, Warning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ByFlag {
    /// One analysis per task label.
    Task,
    /// All rows pooled.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeFlag {
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClusterArgs {
    /// Trait-window CSV.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = TraitsFlag::Big5)]
    pub traits: TraitsFlag,
    /// Divide meta-traits by their number of constituents.
    #[arg(long)]
    pub normalize_meta: bool,
    #[arg(long, default_value_t = PermanovaOptions::default().n_permutations)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeFlag::Auto)]
    pub mode: ModeFlag,
    #[arg(long, value_enum, default_value_t = ByFlag::Task)]
    pub by: ByFlag,
    /// Histogram bins over the permutation distribution.
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` edges over `[0, max F]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Permuted statistics that are `+inf` (zero within-group spread).
    pub infinite: usize,
    pub observed_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskResult {
    /// Task label, or `all` when rows are pooled.
    pub task: String,
    pub n_points: usize,
    pub n_groups: usize,
    pub f: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub exact: bool,
    pub ss_between: f64,
    pub ss_within: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub degenerate: bool,
    pub display: String,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterResults {
    pub representation: TraitSet,
    pub normalize_meta: bool,
    pub tasks: Vec<TaskResult>,
}

impl Tabular for ClusterResults {
    fn header(&self) -> Vec<&'static str> {
        vec!["task", "n_points", "n_groups", "f", "p_value", "n_permutations", "exact"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.tasks
            .iter()
            .map(|t| {
                vec![
                    t.task.clone(),
                    t.n_points.to_string(),
                    t.n_groups.to_string(),
                    fmt_num(t.f),
                    fmt_num(t.p_value),
                    t.n_permutations.to_string(),
                    t.exact.to_string(),
                ]
            })
            .collect()
    }
}

pub fn histogram(stats: &[f64], observed: f64, bins: usize) -> Histogram {
    let bins = bins.max(1);
    let hi = stats
        .iter()
        .chain(std::iter::once(&observed))
        .filter(|v| v.is_finite())
        .fold(0.0f64, |a, &b| a.max(b));
    let hi = if hi > 0.0 { hi } else { 1.0 };
    let mut counts = vec![0; bins];
    let mut infinite = 0;
    for &f in stats {
        if f.is_finite() {
            let i = ((f / hi) * bins as f64).floor() as usize;
            counts[i.min(bins - 1)] += 1;
        } else {
            infinite += 1;
        }
    }
    Histogram {
        edges: (0..=bins).map(|i| hi * i as f64 / bins as f64).collect(),
        counts,
        infinite,
        observed_f: observed,
    }
}

/// Session-averaged points per participant with their group labels.
fn points(table: &SessionTable<f64>, task: Option<&str>, rep: TraitSet, normalize: bool) -> (Vec<Vec<f64>>, Vec<String>) {
    let mut pts = Vec::new();
    let mut groups = Vec::new();
    for (g, members) in table.participant_averages(task) {
        for v in members.values() {
            pts.push(rep.project(v, normalize));
            groups.push(g.clone());
        }
    }
    (pts, groups)
}

pub fn run(args: &ClusterArgs) -> Result<Report<ClusterResults>> {
    let (table, digest) = load_table(&args.input)?;
    let rep = TraitSet::from(args.traits);
    let opts = PermanovaOptions {
        n_permutations: args.permutations,
        seed: args.seed,
        mode: match args.mode {
            ModeFlag::Auto => PermutationMode::Auto,
            ModeFlag::Exact => PermutationMode::Exact,
            ModeFlag::MonteCarlo => PermutationMode::MonteCarlo,
        },
    };
    let mut warnings = Vec::new();
    let labels = table.task_labels();
    let tasks: Vec<Option<String>> = if args.by == ByFlag::None || labels.is_empty() {
        vec![None]
    } else {
        let unlabelled = table.rows().iter().filter(|r| r.task_label.is_none()).count();
        if unlabelled > 0 {
            warnings.push(Warning::new(
                "unlabelled_rows",
                format!("{unlabelled} session rows without a task label are left out"),
            ));
        }
        labels.into_iter().map(Some).collect()
    };
    let mut results = Vec::new();
    for task in tasks {
        let name = task.clone().unwrap_or_else(|| "all".to_string());
        let (pts, groups) = points(&table, task.as_deref(), rep, args.normalize_meta);
        let codes = encode_labels(&groups);
        let n_groups = codes.iter().max().map_or(0, |m| m + 1);
        if n_groups < 2 {
            warnings.push(Warning::new(
                "too_few_groups",
                format!("task {name}: {n_groups} group(s), at least 2 are needed; skipped"),
            ));
            continue;
        }
        let r = permanova_with(&pts, &codes, &opts).map_err(|e| crate::error::CliError::from(e).context(format!("task {name}")))?;
        results.push(TaskResult {
            display: format!("F = {:.2}, {}", r.f_observed, format_p(r.p_value)),
            histogram: histogram(&r.permutation_f, r.f_observed, args.bins),
            task: name,
            n_points: pts.len(),
            n_groups,
            f: r.f_observed,
            p_value: r.p_value,
            n_permutations: r.n_permutations,
            exact: r.exact,
            ss_between: r.ss_between,
            ss_within: r.ss_within,
            df_between: r.df_between,
            df_within: r.df_within,
            degenerate: r.degenerate,
        });
    }
    let manifest = Manifest::new("cluster", args, Some(args.seed), vec![digest])?;
    Report::new(
        manifest,
        warnings,
        ClusterResults {
            representation: rep,
            normalize_meta: args.normalize_meta,
            tasks: results,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.5, 1.0, 2.0, f64::INFINITY], 1.5, 4);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(h.counts, vec![1, 1, 1, 1]);
        assert_eq!(h.infinite, 1);
    }

    #[test]
    fn histogram_of_zeros() {
        let h = histogram(&[0.0, 0.0], 0.0, 2);
        assert_eq!(h.counts, vec![2, 0]);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0]);
    }
}
