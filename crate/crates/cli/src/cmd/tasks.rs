use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use perdyn_core::{SessionTable, TraitVector, Variable};
use perdyn_stats::{
    holm_adjust, mauchly_gg, paired_t, rm_anova, welch_t, AnovaResult, Correction, DataMatrix, SphericityResult,
    StatsError,
};
use serde::Serialize;

use super::load_table;
use crate::error::{CliError, Result};
use crate::report::{fmt_num, format_p, Format, Manifest, Report, Tabular, Warning};

/// Sphericity is rejected, and the correction applied, below this p.
pub const SPHERICITY_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Individual,
    Group,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Posthoc {
    Welch,
    Paired,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TasksArgs {
    /// Trait-window CSV with task labels.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Level::Individual)]
    pub level: Level,
    /// Pairwise test after the ANOVA; no default is assumed.
    #[arg(long, value_enum)]
    pub posthoc: Posthoc,
    /// Significance level for post-hoc decisions.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub normalize_meta: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairwiseResult {
    pub task_a: String,
    pub task_b: String,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub p_holm: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariableResult {
    pub variable: Variable,
    pub sphericity: Option<SphericityResult<f64>>,
    /// Why sphericity was not tested, when it was not.
    pub sphericity_note: Option<String>,
    pub gg_applied: bool,
    pub anova: AnovaResult<f64>,
    pub display: String,
    pub posthoc: Vec<PairwiseResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TasksResults {
    pub level: Level,
    pub posthoc: Posthoc,
    pub tasks: Vec<String>,
    pub units: Vec<String>,
    pub dropped_units: usize,
    pub variables: Vec<VariableResult>,
}

impl Tabular for TasksResults {
    fn header(&self) -> Vec<&'static str> {
        vec!["variable", "f", "df1", "df2", "p_value", "gg_applied", "mauchly_p"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.variables
            .iter()
            .map(|v| {
                vec![
                    v.variable.name().to_string(),
                    fmt_num(v.anova.f),
                    fmt_num(v.anova.df1),
                    fmt_num(v.anova.df2),
                    fmt_num(v.anova.p_value),
                    v.gg_applied.to_string(),
                    v.sphericity.as_ref().map_or(String::new(), |s| fmt_num(s.p_value)),
                ]
            })
            .collect()
    }
}

/// Trait averages per unit, keyed by unit id, for one task.
fn unit_values(table: &SessionTable<f64>, task: &str, level: Level) -> BTreeMap<String, TraitVector<f64>> {
    match level {
        Level::Group => table.group_averages(Some(task)),
        Level::Individual => table
            .participant_averages(Some(task))
            .into_iter()
            .flat_map(|(g, members)| members.into_iter().map(move |(p, v)| (format!("{g}/{p}"), v)))
            .collect(),
    }
}

fn sphericity(m: &DataMatrix<f64>) -> Result<(Option<SphericityResult<f64>>, Option<String>)> {
    let (n, k) = (m.rows(), m.cols());
    if k < 3 {
        return Ok((None, Some("fewer than 3 tasks: sphericity holds trivially".into())));
    }
    if n <= k {
        return Ok((None, Some(format!("{n} units for {k} tasks: too few to test sphericity"))));
    }
    match mauchly_gg(m) {
        Ok(s) => Ok((Some(s), None)),
        Err(StatsError::Degenerate(msg)) => Ok((None, Some(msg))),
        Err(e) => Err(e.into()),
    }
}

pub fn anova_display(a: &AnovaResult<f64>) -> String {
    let df = |x: f64| {
        if (x - x.round()).abs() < 1e-9 {
            format!("{}", x.round())
        } else {
            format!("{x:.2}")
        }
    };
    format!("F({}, {}) = {:.2}, {}", df(a.df1), df(a.df2), a.f, format_p(a.p_value))
}

pub fn run(args: &TasksArgs) -> Result<Report<TasksResults>> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::validation("alpha must lie in (0, 1)"));
    }
    let (table, digest) = load_table(&args.input)?;
    let tasks = table.task_labels();
    if tasks.len() < 2 {
        return Err(CliError::validation(format!(
            "at least 2 task labels are needed, found {}",
            tasks.len()
        )));
    }
    let mut warnings = Vec::new();
    let unlabelled = table.rows().iter().filter(|r| r.task_label.is_none()).count();
    if unlabelled > 0 {
        warnings.push(Warning::new(
            "unlabelled_rows",
            format!("{unlabelled} session rows without a task label are left out"),
        ));
    }
    let per_task: Vec<BTreeMap<String, TraitVector<f64>>> =
        tasks.iter().map(|t| unit_values(&table, t, args.level)).collect();
    let mut all_units: Vec<&String> = per_task.iter().flat_map(|m| m.keys()).collect();
    all_units.sort();
    all_units.dedup();
    let units: Vec<String> = all_units
        .iter()
        .filter(|u| per_task.iter().all(|m| m.contains_key(**u)))
        .map(|u| (*u).clone())
        .collect();
    let dropped = all_units.len() - units.len();
    if dropped > 0 {
        warnings.push(Warning::new(
            "incomplete_units",
            format!("{dropped} units not observed in every task were dropped"),
        ));
    }
    if units.len() < 2 {
        return Err(CliError::validation(format!(
            "{} units observed in every task, at least 2 are needed",
            units.len()
        )));
    }

    let mut variables = Vec::new();
    for var in Variable::ALL {
        let rows: Vec<Vec<f64>> = units
            .iter()
            .map(|u| per_task.iter().map(|m| var.extract(&m[u], args.normalize_meta)).collect())
            .collect();
        let m = DataMatrix::from_rows(&rows)?;
        let (sph, note) = sphericity(&m)?;
        let gg_applied = sph.as_ref().is_some_and(|s| s.p_value < SPHERICITY_ALPHA);
        let correction = if gg_applied {
            Correction::GreenhouseGeisser
        } else {
            Correction::None
        };
        let anova = rm_anova(&m, correction).map_err(|e| CliError::from(e).context(var.name()))?;

        let mut pairs = Vec::new();
        for a in 0..tasks.len() {
            for b in (a + 1)..tasks.len() {
                let (x, y) = (m.column(a), m.column(b));
                let t = match args.posthoc {
                    Posthoc::Welch => welch_t(&x, &y),
                    Posthoc::Paired => paired_t(&x, &y),
                }
                .map_err(|e| CliError::from(e).context(format!("{} {} vs {}", var.name(), tasks[a], tasks[b])))?;
                pairs.push((a, b, t));
            }
        }
        let adjusted = holm_adjust(&pairs.iter().map(|p| p.2.p_value).collect::<Vec<_>>())?;
        let posthoc = pairs
            .into_iter()
            .zip(adjusted)
            .map(|((a, b, t), p_holm)| PairwiseResult {
                task_a: tasks[a].clone(),
                task_b: tasks[b].clone(),
                t: t.t,
                df: t.df,
                p_value: t.p_value,
                p_holm,
                significant: p_holm < args.alpha,
            })
            .collect();
        variables.push(VariableResult {
            variable: var,
            display: anova_display(&anova),
            sphericity: sph,
            sphericity_note: note,
            gg_applied,
            anova,
            posthoc,
        });
    }
    let manifest = Manifest::new("tasks", args, None, vec![digest])?;
    Report::new(
        manifest,
        warnings,
        TasksResults {
            level: args.level,
            posthoc: args.posthoc,
            tasks,
            units,
            dropped_units: dropped,
            variables,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anova_formatting() {
        let a = AnovaResult {
            f: 4.5678,
            df1: 2.0,
            df2: 32.0,
            p_value: 0.0181,
            epsilon_applied: None,
            ss_conditions: 0.0,
            ss_subjects: 0.0,
            ss_error: 0.0,
            degenerate: false,
        };
        assert_eq!(anova_display(&a), "F(2, 32) = 4.57, p = .018");
        let b = AnovaResult {
            df1: 1.666,
            df2: 26.66,
            ..a
        };
        assert_eq!(anova_display(&b), "F(1.67, 26.66) = 4.57, p = .018");
    }
}
