//! Intraclass correlation for the mean of k raters under a two-way random
//! effects model (Shrout and Fleiss ICC(2,k)).

use perdyn_core::Real;
use serde::Serialize;

use crate::error::{invalid, Result, StatsError};
use crate::matrix::{two_way_ss, RatingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct IccResult<T> {
    pub icc: T,
    pub ms_rows: T,
    pub ms_cols: T,
    pub ms_error: T,
    /// Raters.
    pub k: usize,
    /// Subjects.
    pub n: usize,
}

/// ICC(2,k) = (MS_R - MS_E) / (MS_R + (MS_C - MS_E) / n) for `n` subjects
/// (rows) by `k` raters (columns).
pub fn icc2k<T: Real>(m: &RatingMatrix<T>) -> Result<IccResult<T>> {
    let (n, k) = (m.rows(), m.cols());
    if n < 2 || k < 2 {
        return Err(invalid(format!("ICC needs at least 2 subjects and 2 raters, got {n}x{k}")));
    }
    let (ss_rows, ss_cols, ss_error, _) = two_way_ss(m);
    let ms_rows = ss_rows / T::from_usize_lossy(n - 1);
    let ms_cols = ss_cols / T::from_usize_lossy(k - 1);
    let ms_error = ss_error / T::from_usize_lossy((n - 1) * (k - 1));
    let denom = ms_rows + (ms_cols - ms_error) / T::from_usize_lossy(n);
    if denom == T::zero() {
        return Err(StatsError::Degenerate("ICC(2,k) denominator is zero".into()));
    }
    Ok(IccResult {
        icc: (ms_rows - ms_error) / denom,
        ms_rows,
        ms_cols,
        ms_error,
        k,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DataMatrix;

    #[test]
    fn identical_raters_agree_perfectly() {
        let rows: Vec<Vec<f64>> = [0.2, 0.5, 0.9, 0.4].iter().map(|&s| vec![s; 3]).collect();
        let r = icc2k(&DataMatrix::from_rows(&rows).unwrap()).unwrap();
        assert_eq!(r.ms_error, 0.0);
        assert!((r.icc - 1.0).abs() < 1e-12);
    }

    // Subject values 1, 2, 3, 4 with rater deviations; mean squares worked by
    // hand from the two-way table:
    //   grand mean 2.5, row means 1, 2, 3, 4, column means 2.5 + (0, .25, -.25, 0)
    //   SS_R = 4 * (2.25 + .25 + .25 + 2.25) = 20, MS_R = 20/3
    //   SS_C = 4 * (0 + .0625 + .0625 + 0) = .5, MS_C = .5/3
    //   SS_T = 21.5 + ... computed below, SS_E = SS_T - SS_R - SS_C
    #[test]
    fn hand_computed_four_by_four() {
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0, 1.5, 0.5, 1.0],
            vec![2.0, 2.0, 2.0, 2.0],
            vec![3.0, 3.5, 2.5, 3.0],
            vec![4.0, 4.0, 4.0, 4.0],
        ];
        let r = icc2k(&DataMatrix::from_rows(&rows).unwrap()).unwrap();
        // deviations from grand mean 2.5 squared, summed:
        // row1: 2.25+1+4+2.25 = 9.5; row2: 4*.25 = 1; row3: .25+1+0+.25 = 1.5; row4: 4*2.25 = 9
        let ss_t = 9.5 + 1.0 + 1.5 + 9.0;
        let ss_e = ss_t - 20.0 - 0.5;
        assert!((r.ms_rows - 20.0 / 3.0).abs() < 1e-12);
        assert!((r.ms_cols - 0.5 / 3.0).abs() < 1e-12);
        assert!((r.ms_error - ss_e / 9.0).abs() < 1e-12);
        let icc = (20.0 / 3.0 - ss_e / 9.0) / (20.0 / 3.0 + (0.5 / 3.0 - ss_e / 9.0) / 4.0);
        assert!((r.icc - icc).abs() < 1e-12);
    }

    #[test]
    fn constant_shift_invariance() {
        let rows: Vec<Vec<f64>> = vec![vec![0.1, 0.3, 0.2], vec![0.5, 0.4, 0.6], vec![0.9, 0.7, 0.8]];
        let m = DataMatrix::from_rows(&rows).unwrap();
        let a = icc2k(&m).unwrap().icc;
        let b = icc2k(&m.map(|v| v + 3.7)).unwrap().icc;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let one = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(icc2k(&one).is_err());
        let flat = DataMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(icc2k(&flat), Err(StatsError::Degenerate(_))));
    }
}
