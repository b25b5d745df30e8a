use perdyn_core::Real;
use serde::Serialize;

use crate::error::{invalid, Result};

/// Dense row-major table of observations: subjects in rows, raters or
/// conditions in columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct DataMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// `n` subjects by `k` raters, one trait.
pub type RatingMatrix<T> = DataMatrix<T>;

impl<T: Real> DataMatrix<T> {
    /// Builds from complete rows. `None` cells are reported as missing.
    pub fn from_optional_rows(rows: &[Vec<Option<T>>]) -> Result<Self> {
        let mut missing = Vec::new();
        let mut full = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            let mut out = Vec::with_capacity(r.len());
            for (j, c) in r.iter().enumerate() {
                match c {
                    Some(v) => out.push(*v),
                    None => {
                        missing.push(format!("({i},{j})"));
                        out.push(T::nan());
                    }
                }
            }
            full.push(out);
        }
        if !missing.is_empty() {
            return Err(invalid(format!("missing cells: {}", missing.join(" "))));
        }
        Self::from_rows(&full)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(invalid("rows have unequal lengths"));
        }
        let data: Vec<T> = rows.iter().flatten().copied().collect();
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite cell at ({},{})", pos / k.max(1), pos % k.max(1))));
        }
        Ok(Self { rows: n, cols: k, data })
    }

    /// Builds from columns (one vector per condition).
    pub fn from_columns(cols: &[Vec<T>]) -> Result<Self> {
        let n = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != n) {
            return Err(invalid("columns have unequal lengths"));
        }
        let rows: Vec<Vec<T>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Row means, column means and grand mean.
pub(crate) fn marginal_means<T: Real>(m: &DataMatrix<T>) -> (Vec<T>, Vec<T>, T) {
    let (n, k) = (m.rows(), m.cols());
    let kf = T::from_usize_lossy(k);
    let nf = T::from_usize_lossy(n);
    let row_means: Vec<T> = (0..n).map(|i| m.row(i).iter().copied().sum::<T>() / kf).collect();
    let col_means: Vec<T> = (0..k)
        .map(|j| (0..n).map(|i| m.get(i, j)).sum::<T>() / nf)
        .collect();
    let grand = row_means.iter().copied().sum::<T>() / nf;
    (row_means, col_means, grand)
}

/// Sums of squares of the two-way (rows x columns, one observation per
/// cell) decomposition: `(ss_rows, ss_cols, ss_error, ss_total)`, each from
/// its own deviations. The error term sums squared interaction residuals
/// `x_ij - r_i - c_j + g`.
pub(crate) fn two_way_ss<T: Real>(m: &DataMatrix<T>) -> (T, T, T, T) {
    let (row_means, col_means, grand) = marginal_means(m);
    let kf = T::from_usize_lossy(m.cols());
    let nf = T::from_usize_lossy(m.rows());
    let ss_rows = kf * row_means.iter().map(|&r| (r - grand) * (r - grand)).sum::<T>();
    let ss_cols = nf * col_means.iter().map(|&c| (c - grand) * (c - grand)).sum::<T>();
    let mut ss_total = T::zero();
    let mut ss_error = T::zero();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = m.get(i, j);
            ss_total = ss_total + (v - grand) * (v - grand);
            let e = v - row_means[i] - col_means[j] + grand;
            ss_error = ss_error + e * e;
        }
    }
    (ss_rows, ss_cols, ss_error, ss_total)
}
