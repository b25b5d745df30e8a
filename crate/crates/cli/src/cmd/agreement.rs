use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use perdyn_core::io::{read_predictions, read_ratings};
use perdyn_core::traits::meta_linear;
use perdyn_core::{Trait, Variable};
use perdyn_stats::{icc2k, tost_equivalence, DataMatrix, IccResult, TostMode, TostResult};
use serde::Serialize;

use super::read_input;
use crate::error::{CliError, Result};
use crate::report::{fmt_num, Format, Manifest, Report, Tabular, Warning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TostModeFlag {
    Paired,
    Independent,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AgreementArgs {
    /// `rater_id,subject_id,trait,score`.
    #[arg(long)]
    pub ratings: PathBuf,
    /// `subject_id,trait,score`.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = TostModeFlag::Paired)]
    pub tost_mode: TostModeFlag,
    #[arg(long)]
    pub normalize_meta: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Serialize)]
pub struct RaterTost {
    pub rater_id: String,
    pub result: TostResult<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TostSummary {
    /// Mean over raters and subjects of `|rating - subject mean|`.
    pub bound: f64,
    pub equivalent_raters: usize,
    pub n_raters: usize,
    pub summary: String,
    pub per_rater: Vec<RaterTost>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariableAgreement {
    pub variable: Variable,
    pub icc: IccResult<f64>,
    /// Absent when the raters agree exactly and the bound is zero.
    pub tost: Option<TostSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementResults {
    pub raters: Vec<String>,
    pub n_subjects: usize,
    pub alpha: f64,
    pub tost_mode: TostMode,
    pub variables: Vec<VariableAgreement>,
}

impl Tabular for AgreementResults {
    fn header(&self) -> Vec<&'static str> {
        vec!["variable", "icc", "bound", "equivalent_raters", "n_raters"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.variables
            .iter()
            .map(|v| {
                let (bound, eq) = v
                    .tost
                    .as_ref()
                    .map_or((String::new(), String::new()), |t| (fmt_num(t.bound), t.equivalent_raters.to_string()));
                vec![
                    v.variable.name().to_string(),
                    fmt_num(v.icc.icc),
                    bound,
                    eq,
                    self.raters.len().to_string(),
                ]
            })
            .collect()
    }
}

/// Joins a list of cells, truncated for long lists.
fn listing(items: &[String]) -> String {
    const SHOWN: usize = 20;
    let mut s = items.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if items.len() > SHOWN {
        s.push_str(&format!(" and {} more", items.len() - SHOWN));
    }
    s
}

type Scores = BTreeMap<String, [f64; 5]>;

/// Per rater, per subject trait arrays; every cell must be present once.
fn rating_cube(records: &[perdyn_core::io::RatingRecord]) -> Result<(Vec<String>, Vec<String>, BTreeMap<String, Scores>)> {
    let mut cells: BTreeMap<(String, String, Trait), f64> = BTreeMap::new();
    for r in records {
        let t: Trait = r.trait_name.parse()?;
        if !r.score.is_finite() {
            return Err(CliError::validation(format!(
                "rater {}, subject {}, {t}: non-finite score",
                r.rater_id, r.subject_id
            )));
        }
        if cells.insert((r.rater_id.clone(), r.subject_id.clone(), t), r.score).is_some() {
            return Err(CliError::validation(format!(
                "duplicate rating: rater {}, subject {}, trait {t}",
                r.rater_id, r.subject_id
            )));
        }
    }
    let raters: Vec<String> = records.iter().map(|r| r.rater_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let subjects: Vec<String> = records.iter().map(|r| r.subject_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if raters.len() < 2 || subjects.len() < 2 {
        return Err(CliError::validation("ratings need at least two raters and two subjects"));
    }
    let mut missing = Vec::new();
    let mut cube = BTreeMap::new();
    for rater in &raters {
        let mut per_subject = BTreeMap::new();
        for s in &subjects {
            let mut arr = [0.0; 5];
            for t in Trait::ALL {
                match cells.get(&(rater.clone(), s.clone(), t)) {
                    Some(&v) => arr[t.index()] = v,
                    None => missing.push(format!("({rater}, {s}, {t})")),
                }
            }
            per_subject.insert(s.clone(), arr);
        }
        cube.insert(rater.clone(), per_subject);
    }
    if !missing.is_empty() {
        return Err(CliError::validation(format!(
            "incomplete rating matrix, missing (rater, subject, trait): {}",
            listing(&missing)
        )));
    }
    Ok((raters, subjects, cube))
}

fn prediction_table(
    records: &[perdyn_core::io::PredictionRecord],
    subjects: &[String],
    warnings: &mut Vec<Warning>,
) -> Result<Scores> {
    let mut cells: BTreeMap<(String, Trait), f64> = BTreeMap::new();
    for r in records {
        let t: Trait = r.trait_name.parse()?;
        if !r.score.is_finite() {
            return Err(CliError::validation(format!("prediction for {} {t}: non-finite score", r.subject_id)));
        }
        if cells.insert((r.subject_id.clone(), t), r.score).is_some() {
            return Err(CliError::validation(format!(
                "duplicate prediction: subject {}, trait {t}",
                r.subject_id
            )));
        }
    }
    let extra = cells.keys().filter(|(s, _)| subjects.binary_search(s).is_err()).count();
    if extra > 0 {
        warnings.push(Warning::new(
            "unrated_predictions",
            format!("{extra} predictions for subjects without ratings are ignored"),
        ));
    }
    let mut missing = Vec::new();
    let mut out = BTreeMap::new();
    for s in subjects {
        let mut arr = [0.0; 5];
        for t in Trait::ALL {
            match cells.get(&(s.clone(), t)) {
                Some(&v) => arr[t.index()] = v,
                None => missing.push(format!("({s}, {t})")),
            }
        }
        out.insert(s.clone(), arr);
    }
    if !missing.is_empty() {
        return Err(CliError::validation(format!(
            "missing predictions (subject, trait): {}",
            listing(&missing)
        )));
    }
    Ok(out)
}

fn variable_value(scores: &[f64; 5], v: Variable, normalize: bool) -> f64 {
    let [pla, sta] = meta_linear(scores);
    match v {
        Variable::Plasticity => pla / if normalize { 2.0 } else { 1.0 },
        Variable::Stability => sta / if normalize { 3.0 } else { 1.0 },
        _ => scores[Variable::ALL.iter().position(|&x| x == v).expect("listed")],
    }
}

pub fn run(args: &AgreementArgs) -> Result<Report<AgreementResults>> {
    let (rbytes, rdigest) = read_input(&args.ratings)?;
    let (pbytes, pdigest) = read_input(&args.predictions)?;
    let ratings = read_ratings(rbytes.as_slice()).map_err(|e| CliError::from(e).context(args.ratings.display()))?;
    let preds = read_predictions(pbytes.as_slice()).map_err(|e| CliError::from(e).context(args.predictions.display()))?;
    let mode = match args.tost_mode {
        TostModeFlag::Paired => TostMode::Paired,
        TostModeFlag::Independent => TostMode::Independent,
    };
    let mut warnings = Vec::new();
    let (raters, subjects, cube) = rating_cube(&ratings)?;
    let model = prediction_table(&preds, &subjects, &mut warnings)?;

    let mut variables = Vec::new();
    for var in Variable::ALL {
        // subjects x raters
        let rows: Vec<Vec<f64>> = subjects
            .iter()
            .map(|s| {
                raters
                    .iter()
                    .map(|r| variable_value(&cube[r][s], var, args.normalize_meta))
                    .collect()
            })
            .collect();
        let m = DataMatrix::from_rows(&rows)?;
        let icc = icc2k(&m).map_err(|e| CliError::from(e).context(var.name()))?;
        let item_mean: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
        let rater_err: Vec<Vec<f64>> = (0..raters.len())
            .map(|j| rows.iter().zip(&item_mean).map(|(r, mu)| (r[j] - mu).abs()).collect())
            .collect();
        let model_err: Vec<f64> = subjects
            .iter()
            .zip(&item_mean)
            .map(|(s, mu)| (variable_value(&model[s], var, args.normalize_meta) - mu).abs())
            .collect();
        let bound = rater_err.iter().flatten().sum::<f64>() / (raters.len() * subjects.len()) as f64;
        let tost = if bound > 0.0 {
            let per_rater = raters
                .iter()
                .zip(&rater_err)
                .map(|(id, e)| {
                    Ok(RaterTost {
                        rater_id: id.clone(),
                        result: tost_equivalence(&model_err, e, bound, args.alpha, mode)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let equivalent_raters = per_rater.iter().filter(|r| r.result.equivalent).count();
            Some(TostSummary {
                bound,
                equivalent_raters,
                n_raters: raters.len(),
                summary: format!("{equivalent_raters} out of {} raters", raters.len()),
                per_rater,
            })
        } else {
            warnings.push(Warning::new(
                "zero_bound",
                format!("{}: raters agree exactly, equivalence test skipped", var.name()),
            ));
            None
        };
        variables.push(VariableAgreement {
            variable: var,
            icc,
            tost,
        });
    }
    let manifest = Manifest::new("agreement", args, None, vec![rdigest, pdigest])?;
    Report::new(
        manifest,
        warnings,
        AgreementResults {
            n_subjects: subjects.len(),
            raters,
            alpha: args.alpha,
            tost_mode: mode,
            variables,
        },
    )
}
