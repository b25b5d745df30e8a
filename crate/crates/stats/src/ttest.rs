//! Welch and paired t-tests with two-sided p-values.

use perdyn_core::real::{mean, sample_variance};
use perdyn_core::Real;
use serde::Serialize;

use crate::dist::t_two_sided;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct TTestResult<T> {
    pub t: T,
    pub df: T,
    pub p_value: T,
    pub paired: bool,
    /// Zero standard error: `t` is 0 (equal means, p = 1) or infinite
    /// (p = 0).
    pub degenerate: bool,
}

pub(crate) fn check_finite<T: Real>(xs: &[T], name: &str) -> Result<()> {
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{name} contains non-finite values")));
    }
    Ok(())
}

fn finish<T: Real>(diff: T, se: T, df: T, paired: bool) -> TTestResult<T> {
    if se > T::zero() {
        let t = diff / se;
        return TTestResult {
            t,
            df,
            p_value: T::lit(t_two_sided(t.as_f64(), df.as_f64())),
            paired,
            degenerate: false,
        };
    }
    let (t, p) = if diff == T::zero() {
        (T::zero(), T::one())
    } else {
        (diff.signum() * T::infinity(), T::zero())
    };
    TTestResult {
        t,
        df,
        p_value: p,
        paired,
        degenerate: true,
    }
}

/// Welch-Satterthwaite degrees of freedom for the two variance terms
/// `v1 = s1^2 / n1` and `v2 = s2^2 / n2`.
pub fn welch_df<T: Real>(v1: T, n1: usize, v2: T, n2: usize) -> T {
    let num = (v1 + v2) * (v1 + v2);
    let den = v1 * v1 / T::from_usize_lossy(n1 - 1) + v2 * v2 / T::from_usize_lossy(n2 - 1);
    if den > T::zero() {
        num / den
    } else {
        T::from_usize_lossy(n1 + n2 - 2)
    }
}

/// Welch's unequal-variance t-test of `mean(x) - mean(y)`.
pub fn welch_t<T: Real>(x: &[T], y: &[T]) -> Result<TTestResult<T>> {
    if x.len() < 2 || y.len() < 2 {
        return Err(invalid("Welch t-test needs at least 2 observations per sample"));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    let v1 = sample_variance(x) / T::from_usize_lossy(x.len());
    let v2 = sample_variance(y) / T::from_usize_lossy(y.len());
    let df = welch_df(v1, x.len(), v2, y.len());
    Ok(finish(mean(x) - mean(y), (v1 + v2).sqrt(), df, false))
}

/// Paired t-test on the differences `x_i - y_i`.
pub fn paired_t<T: Real>(x: &[T], y: &[T]) -> Result<TTestResult<T>> {
    if x.len() != y.len() {
        return Err(invalid(format!("paired samples differ in length ({} vs {})", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(invalid("paired t-test needs at least 2 pairs"));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    let d: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
    let n = T::from_usize_lossy(d.len());
    let se = (sample_variance(&d) / n).sqrt();
    Ok(finish(mean(&d), se, n - T::one(), true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_pairs() {
        let x = [0.1, 0.5, 0.7];
        let r = paired_t(&x, &x).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(r.degenerate);
    }

    #[test]
    fn welch_equals_pooled_for_equal_variance_and_n() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.5, 3.5, 4.5, 5.5];
        let r = welch_t(&x, &y).unwrap();
        let sp2 = (sample_variance(&x) + sample_variance(&y)) / 2.0;
        let pooled = (mean(&x) - mean(&y)) / (sp2 * (0.5f64)).sqrt();
        assert!((r.t - pooled).abs() < 1e-12);
        assert!((r.df - 6.0).abs() < 1e-12);
    }

    // x = (1, 2, 3): mean 2, s^2 = 1; y = (2, 4, 6, 8): mean 5, s^2 = 20/3.
    // v1 = 1/3, v2 = 5/3, t = -3 / sqrt(2), df = 4 / (1/18 + 25/27) = 216/53.
    #[test]
    fn welch_hand_case() {
        let r = welch_t(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert!((r.t - (-3.0 / 2f64.sqrt())).abs() < 1e-12);
        assert!((r.df - 216.0 / 53.0).abs() < 1e-12);
        assert!(r.p_value > 0.05 && r.p_value < 0.2);
    }

    #[test]
    fn paired_errors() {
        assert!(paired_t(&[1.0, 2.0], &[1.0]).is_err());
        assert!(paired_t(&[1.0], &[1.0]).is_err());
        assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_variance_unequal_means() {
        let r = welch_t(&[1.0f64, 1.0], &[2.0, 2.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 0.0);
        assert!(r.t.is_infinite() && r.t < 0.0);
    }

    proptest! {
        #[test]
        fn welch_df_bounds(
            x in prop::collection::vec(-10.0f64..10.0, 2..20),
            y in prop::collection::vec(-10.0f64..10.0, 2..20),
        ) {
            let r = welch_t(&x, &y).unwrap();
            let lo = (x.len().min(y.len()) - 1) as f64;
            let hi = (x.len() + y.len() - 2) as f64;
            prop_assert!(r.df >= lo - 1e-9 && r.df <= hi + 1e-9);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }
}
