//! Leave-one-out cross-validation.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::gbt::{check_design, fit_gbt, GbtConfig};

/// How `mse_spread` is defined, carried into reports.
pub const SPREAD_DEFINITION: &str = "sample standard deviation of the per-split squared errors";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LooReport {
    /// Prediction for each held-out row, in row order.
    pub predictions: Vec<f64>,
    pub squared_errors: Vec<f64>,
    pub mse_mean: f64,
    pub mse_spread: f64,
    pub n_splits: usize,
}

/// One boosted model per held-out row; splits run in parallel and the
/// result does not depend on their schedule.
pub fn loo_cv(x: &[Vec<f64>], y: &[f64], cfg: &GbtConfig) -> Result<LooReport> {
    cfg.validate()?;
    check_design(x, y, 3)?;
    let n = y.len();
    let predictions: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|held| {
            let xs: Vec<Vec<f64>> = (0..n).filter(|&i| i != held).map(|i| x[i].clone()).collect();
            let ys: Vec<f64> = (0..n).filter(|&i| i != held).map(|i| y[i]).collect();
            fit_gbt(&xs, &ys, cfg).map(|m| m.predict(&x[held]))
        })
        .collect::<Result<_>>()?;
    let squared_errors: Vec<f64> = predictions.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).collect();
    let mse_mean = squared_errors.iter().sum::<f64>() / n as f64;
    let var = squared_errors.iter().map(|e| (e - mse_mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(LooReport {
        predictions,
        squared_errors,
        mse_mean,
        mse_spread: var.sqrt(),
        n_splits: n,
    })
}

impl LooReport {
    /// `mean ± spread` with two decimals.
    pub fn display(&self) -> String {
        format!("{:.2} \u{b1} {:.2}", self.mse_mean, self.mse_spread)
    }
}
