//! Holm's step-down adjustment for multiple comparisons.

use perdyn_core::Real;

use crate::error::{invalid, Result};

/// Holm-adjusted p-values, returned in input order.
///
/// With the raw values sorted ascending as p(1) <= ... <= p(m), the adjusted
/// value of p(i) is the running maximum over j <= i of
/// `min(1, (m - j + 1) * p(j))`.
pub fn holm_adjust<T: Real>(p: &[T]) -> Result<Vec<T>> {
    if let Some(bad) = p.iter().find(|&&v| !(v >= T::zero() && v <= T::one())) {
        return Err(invalid(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    // stable sort keeps tied inputs in their original relative order
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).expect("finite"));
    let mut out = vec![T::zero(); m];
    let mut running = T::zero();
    for (rank, &idx) in order.iter().enumerate() {
        let scaled = (T::from_usize_lossy(m - rank) * p[idx]).min(T::one());
        running = running.max(scaled);
        out[idx] = running;
    }
    Ok(out)
}
