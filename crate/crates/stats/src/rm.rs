//! One-way repeated-measures ANOVA, Mauchly's sphericity test and the
//! Greenhouse-Geisser correction.

use perdyn_core::Real;
use serde::Serialize;

use crate::dist::{chi2_sf, f_sf};
use crate::error::{invalid, Result, StatsError};
use crate::matrix::{two_way_ss, DataMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct SphericityResult<T> {
    pub mauchly_w: T,
    pub chi2: T,
    pub df: usize,
    pub p_value: T,
    pub gg_epsilon: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    None,
    GreenhouseGeisser,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct AnovaResult<T> {
    pub f: T,
    pub df1: T,
    pub df2: T,
    pub p_value: T,
    pub epsilon_applied: Option<T>,
    pub ss_conditions: T,
    pub ss_subjects: T,
    pub ss_error: T,
    /// Zero error mean square: `f` is 0 with p = 1 when the conditions do
    /// not differ either, `+inf` with p = 0 otherwise.
    pub degenerate: bool,
}

/// Relative size under which a sum of squares is treated as rounding
/// residue.
pub const ROUNDOFF: f64 = 1e-12;

/// Orthonormal Helmert contrasts, `(k - 1) x k`, each row orthogonal to the
/// vector of ones.
pub fn helmert_contrasts<T: Real>(k: usize) -> Vec<Vec<T>> {
    (1..k)
        .map(|i| {
            let norm = T::from_usize_lossy(i * (i + 1)).sqrt();
            (0..k)
                .map(|j| {
                    if j < i {
                        T::one() / norm
                    } else if j == i {
                        -T::from_usize_lossy(i) / norm
                    } else {
                        T::zero()
                    }
                })
                .collect()
        })
        .collect()
}

/// Sample covariance (n - 1 denominator) of the columns.
fn column_covariance<T: Real>(m: &DataMatrix<T>) -> Vec<Vec<T>> {
    let (n, k) = (m.rows(), m.cols());
    let means: Vec<T> = (0..k)
        .map(|j| (0..n).map(|i| m.get(i, j)).sum::<T>() / T::from_usize_lossy(n))
        .collect();
    let denom = T::from_usize_lossy(n - 1);
    let mut s = vec![vec![T::zero(); k]; k];
    for a in 0..k {
        for b in a..k {
            let c = (0..n)
                .map(|i| (m.get(i, a) - means[a]) * (m.get(i, b) - means[b]))
                .sum::<T>()
                / denom;
            s[a][b] = c;
            s[b][a] = c;
        }
    }
    s
}

/// Covariance of the orthonormal contrasts, `C S C^T`.
pub fn contrast_covariance<T: Real>(m: &DataMatrix<T>) -> Vec<Vec<T>> {
    let s = column_covariance(m);
    let c = helmert_contrasts::<T>(m.cols());
    let p = c.len();
    let k = m.cols();
    let cs: Vec<Vec<T>> = c
        .iter()
        .map(|row| (0..k).map(|j| (0..k).map(|l| row[l] * s[l][j]).sum()).collect())
        .collect();
    (0..p)
        .map(|a| (0..p).map(|b| (0..k).map(|j| cs[a][j] * c[b][j]).sum()).collect())
        .collect()
}

/// Determinant by Gaussian elimination with partial pivoting.
fn determinant<T: Real>(mut a: Vec<Vec<T>>) -> T {
    let n = a.len();
    let mut det = T::one();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).expect("finite"))
            .expect("nonempty range");
        if a[pivot][col] == T::zero() {
            return T::zero();
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det = det * a[col][col];
        for r in (col + 1)..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] = a[r][c] - factor * a[col][c];
            }
        }
    }
    det
}

fn check_shape<T: Real>(m: &DataMatrix<T>, min_rows: usize, min_cols: usize) -> Result<()> {
    if m.rows() < min_rows || m.cols() < min_cols {
        return Err(invalid(format!(
            "need at least {min_rows} subjects and {min_cols} conditions, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// Greenhouse-Geisser epsilon, `(sum l)^2 / ((k - 1) sum l^2)` over the
/// eigenvalues `l` of the contrast covariance, evaluated through the trace
/// and the Frobenius norm. Clamped to `[1/(k-1), 1]`; a zero covariance
/// gives 1.
pub fn gg_epsilon<T: Real>(m: &DataMatrix<T>) -> Result<T> {
    check_shape(m, 2, 2)?;
    let sc = contrast_covariance(m);
    let p = T::from_usize_lossy(sc.len());
    let trace: T = (0..sc.len()).map(|i| sc[i][i]).sum();
    let frob: T = sc.iter().flatten().map(|&v| v * v).sum();
    if !(frob > T::zero()) {
        return Ok(T::one());
    }
    let eps = trace * trace / (p * frob);
    Ok(eps.max(T::one() / p).min(T::one()))
}

/// Mauchly's W with its chi-square approximation and the Greenhouse-Geisser
/// epsilon. Requires `n > k >= 3`.
///
/// The chi-square uses Box's correction
/// `f = 1 - (2p^2 + p + 2) / (6 p (n - 1))` with `p = k - 1` and
/// `df = k (k - 1) / 2 - 1`. A singular contrast covariance gives `W = 0`
/// and `p = 0`.
pub fn mauchly_gg<T: Real>(m: &DataMatrix<T>) -> Result<SphericityResult<T>> {
    let (n, k) = (m.rows(), m.cols());
    if k < 3 {
        return Err(invalid("sphericity test needs at least 3 conditions"));
    }
    if n <= k {
        return Err(invalid(format!("sphericity test needs more subjects ({n}) than conditions ({k})")));
    }
    let sc = contrast_covariance(m);
    let p = k - 1;
    let pf = T::from_usize_lossy(p);
    let trace: T = (0..p).map(|i| sc[i][i]).sum();
    let cov = column_covariance(m);
    let column_trace: T = (0..k).map(|j| cov[j][j]).sum();
    if !(trace > T::lit(ROUNDOFF) * column_trace) {
        return Err(StatsError::Degenerate("no variance across conditions".into()));
    }
    let det = determinant(sc).max(T::zero());
    let w = (det / (trace / pf).powi(p as i32)).min(T::one());
    let df = k * (k - 1) / 2 - 1;
    let nm1 = T::from_usize_lossy(n - 1);
    let box_f = T::one() - (T::lit(2.0) * pf * pf + pf + T::lit(2.0)) / (T::lit(6.0) * pf * nm1);
    let (chi2, p_value) = if w > T::zero() {
        let chi2 = (-nm1 * box_f * w.ln()).max(T::zero());
        (chi2, T::lit(chi2_sf(chi2.as_f64(), df as f64)))
    } else {
        (T::infinity(), T::zero())
    };
    Ok(SphericityResult {
        mauchly_w: w,
        chi2,
        df,
        p_value,
        gg_epsilon: gg_epsilon(m)?,
    })
}

/// One-way repeated-measures ANOVA on `n` subjects (rows) by `k`
/// conditions (columns).
pub fn rm_anova<T: Real>(m: &DataMatrix<T>, correction: Correction) -> Result<AnovaResult<T>> {
    check_shape(m, 2, 2)?;
    let (n, k) = (m.rows(), m.cols());
    let (ss_subjects, ss_conditions, ss_error, ss_total) = two_way_ss(m);
    // cancellation leaves residue of order eps * ss_total in the
    // difference-based terms; below the cutoff they are taken as zero
    let cutoff = T::lit(ROUNDOFF) * ss_total;
    let clean = |ss: T| if ss <= cutoff { T::zero() } else { ss };
    let (ss_conditions, ss_error) = (clean(ss_conditions), clean(ss_error));
    let df1 = T::from_usize_lossy(k - 1);
    let df2 = T::from_usize_lossy((n - 1) * (k - 1));
    let epsilon = match correction {
        Correction::None => None,
        Correction::GreenhouseGeisser => Some(gg_epsilon(m)?),
    };
    let scale = epsilon.unwrap_or(T::one());
    let (df1c, df2c) = (df1 * scale, df2 * scale);

    let ms_cond = ss_conditions / df1;
    let ms_err = ss_error / df2;
    let (f, p_value, degenerate) = if ms_err > T::zero() {
        let f = ms_cond / ms_err;
        (f, T::lit(f_sf(f.as_f64(), df1c.as_f64(), df2c.as_f64())), false)
    } else if ms_cond > T::zero() {
        (T::infinity(), T::zero(), true)
    } else {
        (T::zero(), T::one(), true)
    };
    Ok(AnovaResult {
        f,
        df1: df1c,
        df2: df2c,
        p_value,
        epsilon_applied: epsilon,
        ss_conditions,
        ss_subjects,
        ss_error,
        degenerate,
    })
}
