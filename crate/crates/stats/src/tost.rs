//! Two one-sided tests for equivalence of two error distributions within a
//! symmetric margin.

use perdyn_core::real::{mean, sample_variance};
use perdyn_core::Real;
use serde::Serialize;

use crate::dist::{t_cdf, t_sf};
use crate::error::{invalid, Result};
use crate::ttest::{check_finite, welch_df};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TostMode {
    /// Differences of matched items.
    Paired,
    /// Welch statistics on two independent samples.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct TostResult<T> {
    pub bound: T,
    pub alpha: T,
    pub mode: TostMode,
    /// Estimated `mean(model) - mean(rater)`.
    pub mean_difference: T,
    pub df: T,
    /// Statistic against H0: difference <= -bound.
    pub t_lower: T,
    /// Statistic against H0: difference >= +bound.
    pub t_upper: T,
    pub p_lower: T,
    pub p_upper: T,
    pub equivalent: bool,
    /// Zero standard error; p-values are 0 or 1 by the sign of each margin.
    pub degenerate: bool,
}

/// Tests H0: |mu_model - mu_rater| >= bound against equivalence.
///
/// Equivalence is declared when both one-sided p-values fall below `alpha`.
pub fn tost_equivalence<T: Real>(
    err_model: &[T],
    err_rater: &[T],
    bound: T,
    alpha: T,
    mode: TostMode,
) -> Result<TostResult<T>> {
    if !(bound > T::zero()) || !bound.is_finite() {
        return Err(invalid("equivalence bound must be positive"));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(invalid("alpha must lie in (0, 1)"));
    }
    check_finite(err_model, "model errors")?;
    check_finite(err_rater, "rater errors")?;
    let (diff, se, df) = match mode {
        TostMode::Paired => {
            if err_model.len() != err_rater.len() {
                return Err(invalid(format!(
                    "paired TOST needs equal lengths ({} vs {})",
                    err_model.len(),
                    err_rater.len()
                )));
            }
            if err_model.len() < 2 {
                return Err(invalid("TOST needs at least 2 pairs"));
            }
            let d: Vec<T> = err_model.iter().zip(err_rater).map(|(&a, &b)| a - b).collect();
            let n = T::from_usize_lossy(d.len());
            (mean(&d), (sample_variance(&d) / n).sqrt(), n - T::one())
        }
        TostMode::Independent => {
            if err_model.len() < 2 || err_rater.len() < 2 {
                return Err(invalid("TOST needs at least 2 observations per sample"));
            }
            let v1 = sample_variance(err_model) / T::from_usize_lossy(err_model.len());
            let v2 = sample_variance(err_rater) / T::from_usize_lossy(err_rater.len());
            (
                mean(err_model) - mean(err_rater),
                (v1 + v2).sqrt(),
                welch_df(v1, err_model.len(), v2, err_rater.len()),
            )
        }
    };

    let (t_lower, t_upper, p_lower, p_upper, degenerate) = if se > T::zero() {
        let tl = (diff + bound) / se;
        let tu = (diff - bound) / se;
        let dff = df.as_f64();
        (tl, tu, T::lit(t_sf(tl.as_f64(), dff)), T::lit(t_cdf(tu.as_f64(), dff)), false)
    } else {
        let inf = T::infinity();
        let (tl, pl) = if diff > -bound { (inf, T::zero()) } else { (-inf, T::one()) };
        let (tu, pu) = if diff < bound { (-inf, T::zero()) } else { (inf, T::one()) };
        (tl, tu, pl, pu, true)
    };
    Ok(TostResult {
        bound,
        alpha,
        mode,
        mean_difference: diff,
        df,
        t_lower,
        t_upper,
        p_lower,
        p_upper,
        equivalent: p_lower < alpha && p_upper < alpha,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_errors_are_equivalent() {
        let e: Vec<f64> = (0..12).map(|i| 0.05 + 0.02 * i as f64).collect();
        let r = tost_equivalence(&e, &e, 0.1, 0.05, TostMode::Paired).unwrap();
        assert!(r.equivalent && r.degenerate);
        assert!(r.p_lower < 0.05 && r.p_upper < 0.05);
    }

    #[test]
    fn identical_independent_samples_with_tight_spread() {
        let e: Vec<f64> = (0..12).map(|i| 0.2 + 0.005 * i as f64).collect();
        let r = tost_equivalence(&e, &e, 0.1, 0.05, TostMode::Independent).unwrap();
        assert!(r.equivalent && !r.degenerate);
        assert_eq!(r.mean_difference, 0.0);
    }

    #[test]
    fn difference_at_bound_is_not_equivalent() {
        // centred noise shifted by exactly the bound
        let noise = [-0.3, 0.1, 0.25, -0.05, 0.0, -0.2, 0.2];
        let rater = vec![0.5; noise.len()];
        let model: Vec<f64> = noise.iter().map(|n| 0.5 + 0.1 + n).collect();
        let r = tost_equivalence(&model, &rater, 0.1, 0.05, TostMode::Paired).unwrap();
        assert!(!r.equivalent);
        assert!((r.p_upper - 0.5).abs() < 1e-9);
    }

    // d = (0.02, -0.01, 0.03, 0.00, 0.01): mean 0.01, s^2 = 0.00025,
    // se = sqrt(0.00005) = 0.0070710678, df = 4, bound 0.05.
    // t_lower = 0.06 / se = 8.48528137, t_upper = -0.04 / se = -5.65685425.
    // One-sided tails for df = 4 (scipy.stats.t): P(T >= 8.4853) = 5.2878e-4,
    // P(T <= -5.6569) = 2.4063e-3.
    #[test]
    fn small_paired_hand_case() {
        let rater = [0.1, 0.2, 0.3, 0.4, 0.5];
        let d = [0.02, -0.01, 0.03, 0.0, 0.01];
        let model: Vec<f64> = rater.iter().zip(d).map(|(r, d)| r + d).collect();
        let r = tost_equivalence(&model, &rater, 0.05, 0.05, TostMode::Paired).unwrap();
        assert!((r.t_lower - 8.485281374238571).abs() < 1e-6);
        assert!((r.t_upper + 5.656854249492381).abs() < 1e-6);
        assert!((r.p_lower - 0.0005287823079153427).abs() < 1e-12);
        assert!((r.p_upper - 0.002406339165022112).abs() < 1e-12);
        assert!(r.equivalent);
    }

    #[test]
    fn validation() {
        assert!(tost_equivalence(&[0.1, 0.2], &[0.1, 0.2], 0.0, 0.05, TostMode::Paired).is_err());
        assert!(tost_equivalence(&[0.1, 0.2], &[0.1], 0.1, 0.05, TostMode::Paired).is_err());
        assert!(tost_equivalence(&[0.1, 0.2], &[0.1, 0.2], 0.1, 1.5, TostMode::Paired).is_err());
    }
}
