//! Stagewise squared-error gradient boosting.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tree::RegressionTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Recorded with every report. The fit itself draws no random numbers.
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(invalid("n_trees must be at least 1"));
        }
        if self.max_depth == 0 {
            return Err(invalid("max_depth must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(invalid("learning_rate must lie in (0, 1]"));
        }
        if self.min_samples_leaf == 0 {
            return Err(invalid("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GbtModel {
    /// Mean of the training targets.
    pub base: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    /// Fitted stages; fewer than requested once residuals vanish.
    pub trees: Vec<RegressionTree>,
}

impl GbtModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.predict_stages(row, self.trees.len())
    }

    /// Prediction using only the first `stages` trees.
    pub fn predict_stages(&self, row: &[f64], stages: usize) -> f64 {
        self.trees[..stages.min(self.trees.len())]
            .iter()
            .fold(self.base, |acc, t| acc + self.learning_rate * t.predict(row))
    }
}

pub(crate) fn check_design(x: &[Vec<f64>], y: &[f64], min_rows: usize) -> Result<usize> {
    if x.len() != y.len() {
        return Err(invalid(format!("{} feature rows but {} targets", x.len(), y.len())));
    }
    if y.len() < min_rows {
        return Err(invalid(format!("at least {min_rows} rows required, got {}", y.len())));
    }
    let p = x[0].len();
    if p == 0 {
        return Err(invalid("at least one feature required"));
    }
    if let Some(i) = x.iter().position(|r| r.len() != p) {
        return Err(invalid(format!("row {i} has {} features, expected {p}", x[i].len())));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite feature or target"));
    }
    Ok(p)
}

/// Boosts regression trees on the residuals of a constant start.
pub fn fit_gbt(x: &[Vec<f64>], y: &[f64], cfg: &GbtConfig) -> Result<GbtModel> {
    cfg.validate()?;
    let p = check_design(x, y, 2)?;
    let base = y.iter().sum::<f64>() / y.len() as f64;
    let mut fitted = vec![base; y.len()];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        let residual: Vec<f64> = y.iter().zip(&fitted).map(|(t, f)| t - f).collect();
        if residual.iter().all(|&r| r == 0.0) {
            break;
        }
        let tree = RegressionTree::fit(x, &residual, cfg.max_depth, cfg.min_samples_leaf);
        for (f, row) in fitted.iter_mut().zip(x) {
            *f += cfg.learning_rate * tree.predict(row);
        }
        trees.push(tree);
    }
    Ok(GbtModel {
        base,
        learning_rate: cfg.learning_rate,
        n_features: p,
        trees,
    })
}

/// Training mean squared error after each number of stages, `0..=trees`.
pub fn training_curve(model: &GbtModel, x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    (0..=model.trees.len())
        .map(|s| {
            x.iter()
                .zip(y)
                .map(|(row, t)| (model.predict_stages(row, s) - t).powi(2))
                .sum::<f64>()
                / y.len() as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_needs_no_trees() {
        let x = vec![vec![0.0], vec![1.0], vec![4.0]];
        let m = fit_gbt(&x, &[2.5; 3], &GbtConfig::default()).unwrap();
        assert!(m.trees.is_empty());
        assert_eq!(training_curve(&m, &x, &[2.5; 3]), vec![0.0]);
    }

    #[test]
    fn step_function_learned_by_stumps() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0, (i * 7 % 20) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| if r[0] > 0.5 { 1.0 } else { 0.0 }).collect();
        let cfg = GbtConfig {
            n_trees: 50,
            max_depth: 1,
            ..Default::default()
        };
        let m = fit_gbt(&x, &y, &cfg).unwrap();
        let mse = *training_curve(&m, &x, &y).last().unwrap();
        assert!(mse < 1e-4, "{mse}");
    }

    #[test]
    fn config_rules() {
        let x = vec![vec![0.0], vec![1.0]];
        for bad in [
            GbtConfig {
                n_trees: 0,
                ..Default::default()
            },
            GbtConfig {
                learning_rate: 1.5,
                ..Default::default()
            },
            GbtConfig {
                max_depth: 0,
                ..Default::default()
            },
        ] {
            assert!(fit_gbt(&x, &[0.0, 1.0], &bad).is_err());
        }
        assert!(fit_gbt(&x, &[0.0], &GbtConfig::default()).is_err());
    }
}
