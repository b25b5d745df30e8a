//! Group performance prediction from group-level trait averages.
//!
//! Gradient boosted regression trees with squared-error loss are evaluated
//! by leave-one-out cross-validation over groups. [`compare_predictors`]
//! runs the perceived and self-reported representations side by side.
//!
//! Everything here is deterministic: the boosted fit draws no random
//! numbers, and the parallel splits are collected in row order.

pub mod compare;
pub mod cv;
pub mod error;
pub mod gbt;
pub mod tree;

pub use compare::{compare_predictors, self_report_group_means, Comparison, FeatureSource, PredictorRun};
pub use cv::{loo_cv, LooReport, SPREAD_DEFINITION};
pub use error::{PredictError, Result};
pub use gbt::{fit_gbt, training_curve, GbtConfig, GbtModel};
pub use tree::{Node, RegressionTree};
