//! CSV readers and writers for trait windows, performance scores, self
//! reports and rater scores. All files are UTF-8 with a header row and `.`
//! as decimal separator.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::real::Real;
use crate::session::{SessionRow, SessionTable};
use crate::trajectory::TraitTrajectory;
use crate::traits::TraitVector;

pub const TRAIT_WINDOW_HEADER: [&str; 10] = [
    "group_id",
    "session_id",
    "task_label",
    "participant_id",
    "t_start_s",
    "openness",
    "conscientiousness",
    "extraversion",
    "agreeableness",
    "emotional_stability",
];

/// One line of the trait-window CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitWindowRecord {
    pub group_id: String,
    pub session_id: String,
    pub task_label: String,
    pub participant_id: String,
    pub t_start_s: f64,
    pub openness: f64,
    pub conscientiousness: f64,
    pub extraversion: f64,
    pub agreeableness: f64,
    pub emotional_stability: f64,
}

impl TraitWindowRecord {
    fn scores(&self) -> [f64; 5] {
        [
            self.openness,
            self.conscientiousness,
            self.extraversion,
            self.agreeableness,
            self.emotional_stability,
        ]
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str], what: &str) -> Result<()> {
    let header = rdr.headers()?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(validation(format!(
            "{what} header must be `{}`, found `{}`",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// Parses a trait-window CSV into a validated session table. Rows of one
/// `(session, participant)` pair may appear in any order.
pub fn read_trait_windows<T: Real, R: Read>(input: R) -> Result<SessionTable<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(&mut rdr, &TRAIT_WINDOW_HEADER, "trait-window CSV")?;

    let mut order: Vec<(String, String)> = Vec::new();
    let mut meta: BTreeMap<(String, String), (String, Option<String>)> = BTreeMap::new();
    let mut samples: BTreeMap<(String, String), Vec<(f64, TraitVector<T>)>> = BTreeMap::new();
    for (line, rec) in rdr.deserialize::<TraitWindowRecord>().enumerate() {
        let rec = rec?;
        let scores = rec.scores().map(T::lit);
        let v = TraitVector::from_array(scores)
            .map_err(|e| validation(format!("row {}: {e}", line + 2)))?;
        let key = (rec.session_id.clone(), rec.participant_id.clone());
        let task = (!rec.task_label.is_empty()).then(|| rec.task_label.clone());
        match meta.get(&key) {
            Some((g, t)) if *g != rec.group_id || *t != task => {
                return Err(validation(format!(
                    "row {}: participant {} in session {} changes group or task",
                    line + 2,
                    rec.participant_id,
                    rec.session_id
                )))
            }
            Some(_) => {}
            None => {
                order.push(key.clone());
                meta.insert(key.clone(), (rec.group_id.clone(), task));
            }
        }
        samples.entry(key).or_default().push((rec.t_start_s, v));
    }

    let mut rows = Vec::with_capacity(order.len());
    for key in order {
        let mut s = samples.remove(&key).unwrap_or_default();
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (group_id, task_label) = meta.remove(&key).expect("meta recorded");
        let (session_id, participant_id) = key;
        rows.push(SessionRow {
            group_id,
            session_id,
            task_label,
            trajectory: TraitTrajectory::new(participant_id, s)?,
        });
    }
    SessionTable::new(rows)
}

/// Writes every snapshot of every row, in row order.
pub fn write_trait_windows<T: Real, W: Write>(table: &SessionTable<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in table.rows() {
        write_rows(&mut w, row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes trait-window records for one row.
pub fn write_rows<T: Real, W: Write>(w: &mut csv::Writer<W>, row: &SessionRow<T>) -> Result<()> {
    for (t, v) in row.trajectory.samples() {
        let s = v.as_array().map(Real::as_f64);
        w.serialize(TraitWindowRecord {
            group_id: row.group_id.clone(),
            session_id: row.session_id.clone(),
            task_label: row.task_label.clone().unwrap_or_default(),
            participant_id: row.participant_id().to_string(),
            t_start_s: *t,
            openness: s[0],
            conscientiousness: s[1],
            extraversion: s[2],
            agreeableness: s[3],
            emotional_stability: s[4],
        })?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PerformanceRecord {
    group_id: String,
    performance_score: f64,
}

pub fn read_performance<R: Read>(input: R) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(&mut rdr, &["group_id", "performance_score"], "performance CSV")?;
    let mut out = BTreeMap::new();
    for rec in rdr.deserialize::<PerformanceRecord>() {
        let rec = rec?;
        if !rec.performance_score.is_finite() {
            return Err(validation(format!("group {}: non-finite performance score", rec.group_id)));
        }
        if out.insert(rec.group_id.clone(), rec.performance_score).is_some() {
            return Err(validation(format!("duplicate performance row for group {}", rec.group_id)));
        }
    }
    Ok(out)
}

pub fn write_performance<W: Write>(scores: &BTreeMap<String, f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (g, &s) in scores {
        w.serialize(PerformanceRecord {
            group_id: g.clone(),
            performance_score: s,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SelfReportRecord {
    participant_id: String,
    openness: f64,
    conscientiousness: f64,
    extraversion: f64,
    agreeableness: f64,
    emotional_stability: f64,
}

/// Reads self-reported traits.
///
/// With `rescale`, each trait column is min-max mapped onto `[0, 1]` across
/// participants (a constant column maps to 0.5). Without it, scores must
/// already lie in `[0, 1]`.
pub fn read_self_reports<T: Real, R: Read>(input: R, rescale: bool) -> Result<BTreeMap<String, TraitVector<T>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(
        &mut rdr,
        &[
            "participant_id",
            "openness",
            "conscientiousness",
            "extraversion",
            "agreeableness",
            "emotional_stability",
        ],
        "self-report CSV",
    )?;
    let mut raw: Vec<(String, [f64; 5])> = Vec::new();
    for rec in rdr.deserialize::<SelfReportRecord>() {
        let r = rec?;
        let s = [
            r.openness,
            r.conscientiousness,
            r.extraversion,
            r.agreeableness,
            r.emotional_stability,
        ];
        if s.iter().any(|x| !x.is_finite()) {
            return Err(validation(format!("participant {}: non-finite score", r.participant_id)));
        }
        raw.push((r.participant_id, s));
    }
    if rescale {
        raw = min_max_rescale(raw);
    }
    let mut out = BTreeMap::new();
    for (p, s) in raw {
        let v = TraitVector::from_array(s.map(T::lit))
            .map_err(|e| validation(format!("participant {p}: {e}")))?;
        if out.insert(p.clone(), v).is_some() {
            return Err(validation(format!("duplicate self report for participant {p}")));
        }
    }
    Ok(out)
}

fn min_max_rescale(mut rows: Vec<(String, [f64; 5])>) -> Vec<(String, [f64; 5])> {
    for i in 0..5 {
        let lo = rows.iter().map(|r| r.1[i]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r.1[i]).fold(f64::NEG_INFINITY, f64::max);
        for r in &mut rows {
            r.1[i] = if hi > lo { (r.1[i] - lo) / (hi - lo) } else { 0.5 };
        }
    }
    rows
}

pub fn write_self_reports<T: Real, W: Write>(reports: &BTreeMap<String, TraitVector<T>>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (p, v) in reports {
        let s = v.as_array().map(Real::as_f64);
        w.serialize(SelfReportRecord {
            participant_id: p.clone(),
            openness: s[0],
            conscientiousness: s[1],
            extraversion: s[2],
            agreeableness: s[3],
            emotional_stability: s[4],
        })?;
    }
    w.flush()?;
    Ok(())
}

/// One observer score: `rater_id,subject_id,trait,score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater_id: String,
    pub subject_id: String,
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub score: f64,
}

/// One model prediction: `subject_id,trait,score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub subject_id: String,
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub score: f64,
}

pub fn read_ratings<R: Read>(input: R) -> Result<Vec<RatingRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(&mut rdr, &["rater_id", "subject_id", "trait", "score"], "ratings CSV")?;
    rdr.deserialize().map(|r| r.map_err(Into::into)).collect()
}

pub fn read_predictions<R: Read>(input: R) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(&mut rdr, &["subject_id", "trait", "score"], "predictions CSV")?;
    rdr.deserialize().map(|r| r.map_err(Into::into)).collect()
}

pub fn write_ratings<W: Write>(ratings: &[RatingRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in ratings {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_predictions<W: Write>(predictions: &[PredictionRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in predictions {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
