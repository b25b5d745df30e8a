//! Permutational multivariate analysis of variance on Euclidean distances.
//!
//! The pseudo F-ratio compares between-group and within-group sums of
//! squared distances to the group centroids:
//!
//! ```text
//! F = (SS_A / (a - 1)) / (SS_W / (N - a))
//! ```
//!
//! Significance comes from relabelling. Small designs are enumerated
//! exhaustively; larger ones are sampled with Fisher-Yates shuffles, each
//! permutation drawing from its own ChaCha stream so the result does not
//! depend on how the work is scheduled across threads.

use std::collections::BTreeSet;

use perdyn_core::Real;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result, StatsError};

/// Designs with at most this many distinct label assignments are
/// enumerated exactly in [`PermutationMode::Auto`].
pub const EXACT_LIMIT: u128 = 100_000;

/// Relative tolerance (against the total sum of squares) under which a
/// permuted statistic counts as a tie with the observed one.
pub const TIE_TOLERANCE: f64 = 1e-10;

pub const DEFAULT_PERMUTATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct PseudoF<T> {
    pub f: T,
    pub ss_between: T,
    pub ss_within: T,
    pub df_between: usize,
    pub df_within: usize,
    /// Set when `ss_within` is zero and `f` is reported as `+inf`.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct PermanovaResult<T> {
    pub f_observed: T,
    pub p_value: T,
    /// Number of permuted statistics behind `p_value`. In exact mode this
    /// is the number of distinct label assignments, observed included.
    pub n_permutations: usize,
    pub exact: bool,
    pub permutation_f: Vec<T>,
    pub ss_between: T,
    pub ss_within: T,
    pub df_between: usize,
    pub df_within: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMode {
    /// Exact when the design has at most [`EXACT_LIMIT`] assignments.
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermanovaOptions {
    pub n_permutations: usize,
    pub seed: u64,
    pub mode: PermutationMode,
}

impl Default for PermanovaOptions {
    fn default() -> Self {
        Self {
            n_permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
            mode: PermutationMode::Auto,
        }
    }
}

/// Maps arbitrary labels onto `0..a` in sorted label order.
pub fn encode_labels<S: Ord>(labels: &[S]) -> Vec<usize> {
    let distinct: Vec<&S> = labels.iter().collect::<BTreeSet<_>>().into_iter().collect();
    labels
        .iter()
        .map(|l| distinct.binary_search(&l).expect("label present"))
        .collect()
}

/// Points centred on the grand mean, compact labels and group sizes.
struct Design<T> {
    centred: Vec<Vec<T>>,
    labels: Vec<usize>,
    sizes: Vec<usize>,
    dim: usize,
    ss_total: T,
}

impl<T: Real> Design<T> {
    fn new(points: &[Vec<T>], labels: &[usize]) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(invalid(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let dim = points.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(invalid("points must have at least one coordinate"));
        }
        if let Some(i) = points.iter().position(|p| p.len() != dim) {
            return Err(invalid(format!("point {i} has dimension {} (expected {dim})", points[i].len())));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        let labels = encode_labels(labels);
        let a = labels.iter().max().map_or(0, |m| m + 1);
        let n = points.len();
        if a < 2 {
            return Err(invalid("at least two groups are required"));
        }
        if n <= a {
            return Err(invalid(format!("need more observations ({n}) than groups ({a})")));
        }
        let mut sizes = vec![0usize; a];
        for &l in &labels {
            sizes[l] += 1;
        }

        let nf = T::from_usize_lossy(n);
        let grand: Vec<T> = (0..dim)
            .map(|d| points.iter().map(|p| p[d]).sum::<T>() / nf)
            .collect();
        let centred: Vec<Vec<T>> = points
            .iter()
            .map(|p| p.iter().zip(&grand).map(|(&x, &g)| x - g).collect())
            .collect();
        let ss_total = centred.iter().flatten().map(|&v| v * v).sum();
        Ok(Self {
            centred,
            labels,
            sizes,
            dim,
            ss_total,
        })
    }

    fn groups(&self) -> usize {
        self.sizes.len()
    }

    /// Between-group sum of squares from group sums of centred points.
    fn ss_between_fast(&self, labels: &[usize]) -> T {
        let mut sums = vec![T::zero(); self.groups() * self.dim];
        for (p, &l) in self.centred.iter().zip(labels) {
            let row = &mut sums[l * self.dim..(l + 1) * self.dim];
            for (s, &x) in row.iter_mut().zip(p) {
                *s = *s + x;
            }
        }
        self.ss_between_from_sums(&sums)
    }

    fn ss_between_from_sums(&self, sums: &[T]) -> T {
        sums.chunks(self.dim)
            .zip(&self.sizes)
            .map(|(s, &n)| s.iter().map(|&v| v * v).sum::<T>() / T::from_usize_lossy(n))
            .sum()
    }

    fn f_from_between(&self, ss_between: T) -> T {
        let n = self.labels.len();
        let a = self.groups();
        let ss_within = (self.ss_total - ss_between).max(T::zero());
        let num = ss_between / T::from_usize_lossy(a - 1);
        let den = ss_within / T::from_usize_lossy(n - a);
        if den > T::zero() {
            num / den
        } else {
            T::infinity()
        }
    }

    /// Both sums of squares from explicit centroid distances.
    fn observed(&self) -> PseudoF<T> {
        let a = self.groups();
        let n = self.labels.len();
        let mut means = vec![T::zero(); a * self.dim];
        for (p, &l) in self.centred.iter().zip(&self.labels) {
            for (m, &x) in means[l * self.dim..(l + 1) * self.dim].iter_mut().zip(p) {
                *m = *m + x;
            }
        }
        for (g, &size) in self.sizes.iter().enumerate() {
            for m in &mut means[g * self.dim..(g + 1) * self.dim] {
                *m = *m / T::from_usize_lossy(size);
            }
        }
        let mut ss_within = T::zero();
        for (p, &l) in self.centred.iter().zip(&self.labels) {
            let m = &means[l * self.dim..(l + 1) * self.dim];
            ss_within = ss_within + p.iter().zip(m).map(|(&x, &c)| (x - c) * (x - c)).sum::<T>();
        }
        // centred data: the grand mean is the origin
        let ss_between = means
            .chunks(self.dim)
            .zip(&self.sizes)
            .map(|(m, &size)| T::from_usize_lossy(size) * m.iter().map(|&v| v * v).sum::<T>())
            .sum::<T>();
        let df_between = a - 1;
        let df_within = n - a;
        let degenerate = ss_within <= T::zero();
        let f = if degenerate {
            T::infinity()
        } else {
            (ss_between / T::from_usize_lossy(df_between)) / (ss_within / T::from_usize_lossy(df_within))
        };
        PseudoF {
            f,
            ss_between,
            ss_within,
            df_between,
            df_within,
            degenerate,
        }
    }
}

/// Pseudo F-ratio for Euclidean points grouped by `labels`.
///
/// Identical points everywhere are rejected as degenerate. Perfect
/// separation (`ss_within == 0`) yields `f = +inf` with the `degenerate`
/// flag set.
pub fn pseudo_f<T: Real>(points: &[Vec<T>], labels: &[usize]) -> Result<PseudoF<T>> {
    let design = Design::new(points, labels)?;
    if design.ss_total <= T::zero() {
        return Err(StatsError::Degenerate("no variance: all points identical".into()));
    }
    Ok(design.observed())
}

/// Number of distinct assignments of `sizes.iter().sum()` items to labelled
/// groups of the given sizes, or `None` once it exceeds `cap`.
pub fn assignment_count(sizes: &[usize], cap: u128) -> Option<u128> {
    let mut remaining: usize = sizes.iter().sum();
    let mut total: u128 = 1;
    for &s in sizes {
        // C(remaining, s), multiplied incrementally so intermediates stay exact
        let mut c: u128 = 1;
        for i in 0..s {
            c = c.checked_mul((remaining - i) as u128)? / (i as u128 + 1);
        }
        total = total.checked_mul(c)?;
        if total > cap {
            return None;
        }
        remaining -= s;
    }
    Some(total)
}

/// PERMANOVA with the default options apart from permutation count and seed.
pub fn permanova<T: Real>(
    points: &[Vec<T>],
    labels: &[usize],
    n_permutations: usize,
    seed: u64,
) -> Result<PermanovaResult<T>> {
    permanova_with(
        points,
        labels,
        &PermanovaOptions {
            n_permutations,
            seed,
            mode: PermutationMode::Auto,
        },
    )
}

pub fn permanova_with<T: Real>(
    points: &[Vec<T>],
    labels: &[usize],
    opts: &PermanovaOptions,
) -> Result<PermanovaResult<T>> {
    let design = Design::new(points, labels)?;
    if design.ss_total <= T::zero() {
        return Err(StatsError::Degenerate("no variance: all points identical".into()));
    }
    let observed = design.observed();
    let count = assignment_count(&design.sizes, EXACT_LIMIT);
    let exact = match opts.mode {
        PermutationMode::Exact => {
            if count.is_none() {
                return Err(invalid(format!(
                    "exact enumeration limited to {EXACT_LIMIT} label assignments"
                )));
            }
            true
        }
        PermutationMode::MonteCarlo => false,
        PermutationMode::Auto => count.is_some(),
    };
    if !exact && opts.n_permutations == 0 {
        return Err(invalid("n_permutations must be at least 1"));
    }

    let between_obs = design.ss_between_fast(&design.labels);
    let threshold = between_obs - T::lit(TIE_TOLERANCE) * design.ss_total;

    let between: Vec<T> = if exact {
        enumerate_between(&design)
    } else {
        (0..opts.n_permutations)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(i as u64);
                let mut shuffled = design.labels.clone();
                shuffled.shuffle(&mut rng);
                design.ss_between_fast(&shuffled)
            })
            .collect()
    };

    let hits = between.iter().filter(|&&b| b >= threshold).count();
    let total = between.len();
    let p_value = if exact {
        hits as f64 / total as f64
    } else {
        (1 + hits) as f64 / (1 + total) as f64
    };
    Ok(PermanovaResult {
        f_observed: observed.f,
        p_value: T::lit(p_value),
        n_permutations: total,
        exact,
        permutation_f: between.into_iter().map(|b| design.f_from_between(b)).collect(),
        ss_between: observed.ss_between,
        ss_within: observed.ss_within,
        df_between: observed.df_between,
        df_within: observed.df_within,
        degenerate: observed.degenerate,
    })
}

/// Between-group sum of squares for every distinct labelled assignment with
/// the observed group sizes, in lexicographic order of assignments.
fn enumerate_between<T: Real>(design: &Design<T>) -> Vec<T> {
    struct State<'a, T> {
        design: &'a Design<T>,
        remaining: Vec<usize>,
        sums: Vec<T>,
        out: Vec<T>,
    }

    fn recurse<T: Real>(st: &mut State<'_, T>, item: usize) {
        let d = st.design;
        if item == d.centred.len() {
            let b = d.ss_between_from_sums(&st.sums);
            st.out.push(b);
            return;
        }
        for g in 0..d.groups() {
            if st.remaining[g] == 0 {
                continue;
            }
            st.remaining[g] -= 1;
            let saved: Vec<T> = st.sums[g * d.dim..(g + 1) * d.dim].to_vec();
            for (s, &x) in st.sums[g * d.dim..(g + 1) * d.dim].iter_mut().zip(&d.centred[item]) {
                *s = *s + x;
            }
            recurse(st, item + 1);
            st.sums[g * d.dim..(g + 1) * d.dim].copy_from_slice(&saved);
            st.remaining[g] += 1;
        }
    }

    let mut st = State {
        design,
        remaining: design.sizes.clone(),
        sums: vec![T::zero(); design.groups() * design.dim],
        out: Vec::new(),
    };
    recurse(&mut st, 0);
    st.out
}
