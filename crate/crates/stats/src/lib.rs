//! Inferential statistics for group-clustering, rater-agreement and
//! repeated-measures analyses of trait data.
//!
//! Every routine is generic over [`perdyn_core::Real`]. Tail probabilities
//! are evaluated in `f64`.

pub mod dist;
pub mod error;
pub mod holm;
pub mod icc;
pub mod matrix;
pub mod permanova;
pub mod rm;
pub mod tost;
pub mod ttest;

pub use error::{Result, StatsError};
pub use holm::holm_adjust;
pub use icc::{icc2k, IccResult};
pub use matrix::{DataMatrix, RatingMatrix};
pub use permanova::{
    encode_labels, permanova, permanova_with, pseudo_f, PermanovaOptions, PermanovaResult, PermutationMode, PseudoF,
};
pub use rm::{gg_epsilon, mauchly_gg, rm_anova, AnovaResult, Correction, SphericityResult};
pub use tost::{tost_equivalence, TostMode, TostResult};
pub use ttest::{paired_t, welch_t, TTestResult};

pub type DataMatrix64 = DataMatrix<f64>;
pub type PermanovaResult64 = PermanovaResult<f64>;
pub type IccResult64 = IccResult<f64>;
pub type TostResult64 = TostResult<f64>;
pub type SphericityResult64 = SphericityResult<f64>;
pub type AnovaResult64 = AnovaResult<f64>;
pub type TTestResult64 = TTestResult<f64>;
