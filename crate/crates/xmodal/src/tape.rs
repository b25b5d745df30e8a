//! Reverse-mode automatic differentiation over whole matrices.
//!
//! Every operation evaluates eagerly and records its inputs; `backward`
//! walks the record in reverse and accumulates adjoints.

use perdyn_core::Real;

use crate::mat::Mat;

/// Variance floor inside layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Lower limit of a linear-attention denominator. Values below it have
/// the constant added; larger values pass through unchanged.
pub const DENOMINATOR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub(crate) fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulTN(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Elu1(Var),
    Relu(Var),
    Sigmoid(Var),
    LayerNorm(Var),
    ColSum(Var),
    MeanRows(Var),
    DivCol(Var, Var),
    GuardDenominator(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    Mse(Var, Mat<T>),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Mat<T>,
    op: Op<T>,
}

#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat<T> {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, m: Mat<T>) -> Var {
        self.push(m, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a^T b`.
    pub fn matmul_tn(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_tn(self.value(b));
        self.push(v, Op::MatMulTN(a, b))
    }

    /// `a b^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_nt(self.value(b));
        self.push(v, Op::MatMulNT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    /// Adds the `1 x c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (x, r) = (self.value(a), self.value(b));
        let v = Mat::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] + r[(0, j)]);
        self.push(v, Op::AddRow(a, b))
    }

    /// Scales every row of `a` elementwise by the `1 x c` row `g`.
    pub fn mul_row(&mut self, a: Var, g: Var) -> Var {
        let (x, r) = (self.value(a), self.value(g));
        let v = Mat::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] * r[(0, j)]);
        self.push(v, Op::MulRow(a, g))
    }

    /// `elu(x) + 1`, strictly positive.
    pub fn elu1(&mut self, a: Var) -> Var {
        let v = self.value(a).map(elu1);
        self.push(v, Op::Elu1(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(T::zero()));
        self.push(v, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    /// Per-row standardization without gain or bias.
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let v = normalize_rows(self.value(a));
        self.push(v, Op::LayerNorm(a))
    }

    pub fn col_sum(&mut self, a: Var) -> Var {
        let v = self.value(a).col_sum();
        self.push(v, Op::ColSum(a))
    }

    /// Mean over rows, `1 x c`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let n = T::from_usize_lossy(x.rows());
        let v = x.col_sum().map(|s| s / n);
        self.push(v, Op::MeanRows(a))
    }

    /// Divides row `i` of `a` by `b[i, 0]`.
    pub fn div_col(&mut self, a: Var, b: Var) -> Var {
        let (x, d) = (self.value(a), self.value(b));
        let v = Mat::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] / d[(i, 0)]);
        self.push(v, Op::DivCol(a, b))
    }

    pub fn guard_denominator(&mut self, a: Var) -> Var {
        let v = self.value(a).map(guard);
        self.push(v, Op::GuardDenominator(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice_cols(start, len);
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let mats: Vec<&Mat<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Mat::concat_cols(&mats);
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    /// Mean squared error against a constant target, `1 x 1`.
    pub fn mse(&mut self, a: Var, target: Mat<T>) -> Var {
        let x = self.value(a);
        debug_assert_eq!(x.shape(), target.shape());
        let n = T::from_usize_lossy(x.data().len());
        let s: T = x.data().iter().zip(target.data()).map(|(&p, &t)| (p - t) * (p - t)).sum();
        self.push(Mat::filled(1, 1, s / n), Op::Mse(a, target))
    }

    /// Adjoints of every node with respect to the scalar `out`. Nodes that
    /// `out` does not depend on get `None`.
    pub fn backward(&self, out: Var) -> Vec<Option<Mat<T>>> {
        let mut grads: Vec<Option<Mat<T>>> = vec![None; self.nodes.len()];
        let shape = self.value(out).shape();
        grads[out.0] = Some(Mat::filled(shape.0, shape.1, T::one()));
        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        grads
    }

    fn propagate(&self, idx: usize, g: &Mat<T>, grads: &mut [Option<Mat<T>>]) {
        let node = &self.nodes[idx];
        let y = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                accumulate(grads, *a, g.matmul_nt(val(*b)));
                accumulate(grads, *b, val(*a).matmul_tn(g));
            }
            Op::MatMulTN(a, b) => {
                accumulate(grads, *a, val(*b).matmul_nt(g));
                accumulate(grads, *b, val(*a).matmul(g));
            }
            Op::MatMulNT(a, b) => {
                accumulate(grads, *a, g.matmul(val(*b)));
                accumulate(grads, *b, g.matmul_tn(val(*a)));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::AddRow(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.col_sum());
            }
            Op::MulRow(a, r) => {
                let (x, gain) = (val(*a), val(*r));
                accumulate(grads, *a, Mat::from_fn(g.rows(), g.cols(), |i, j| g[(i, j)] * gain[(0, j)]));
                accumulate(grads, *r, g.zip_map(x, |u, v| u * v).col_sum());
            }
            Op::Elu1(a) => {
                let x = val(*a);
                let d = Mat::from_fn(g.rows(), g.cols(), |i, j| {
                    if x[(i, j)] > T::zero() {
                        g[(i, j)]
                    } else {
                        g[(i, j)] * y[(i, j)]
                    }
                });
                accumulate(grads, *a, d);
            }
            Op::Relu(a) => {
                let x = val(*a);
                let d = g.zip_map(x, |u, v| if v > T::zero() { u } else { T::zero() });
                accumulate(grads, *a, d);
            }
            Op::Sigmoid(a) => {
                accumulate(grads, *a, g.zip_map(y, |u, s| u * s * (T::one() - s)));
            }
            Op::LayerNorm(a) => {
                let x = val(*a);
                let c = T::from_usize_lossy(x.cols());
                let mut d = Mat::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    let (_, inv_std) = row_moments(x.row(i));
                    let gy = g.row(i);
                    let yr = y.row(i);
                    let mean_g = gy.iter().copied().sum::<T>() / c;
                    let mean_gy = gy.iter().zip(yr).map(|(&u, &v)| u * v).sum::<T>() / c;
                    for j in 0..x.cols() {
                        d[(i, j)] = inv_std * (gy[j] - mean_g - yr[j] * mean_gy);
                    }
                }
                accumulate(grads, *a, d);
            }
            Op::ColSum(a) => {
                let rows = val(*a).rows();
                accumulate(grads, *a, Mat::from_fn(rows, g.cols(), |_, j| g[(0, j)]));
            }
            Op::MeanRows(a) => {
                let rows = val(*a).rows();
                let n = T::from_usize_lossy(rows);
                accumulate(grads, *a, Mat::from_fn(rows, g.cols(), |_, j| g[(0, j)] / n));
            }
            Op::DivCol(a, b) => {
                let (x, d) = (val(*a), val(*b));
                accumulate(grads, *a, Mat::from_fn(g.rows(), g.cols(), |i, j| g[(i, j)] / d[(i, 0)]));
                let db = Mat::from_fn(d.rows(), 1, |i, _| {
                    let s: T = g.row(i).iter().zip(x.row(i)).map(|(&u, &v)| u * v).sum();
                    -s / (d[(i, 0)] * d[(i, 0)])
                });
                accumulate(grads, *b, db);
            }
            Op::GuardDenominator(a) => accumulate(grads, *a, g.clone()),
            Op::SliceCols(a, start) => {
                let x = val(*a);
                let mut d = Mat::zeros(x.rows(), x.cols());
                for i in 0..g.rows() {
                    for j in 0..g.cols() {
                        d[(i, start + j)] = g[(i, j)];
                    }
                }
                accumulate(grads, *a, d);
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for p in parts {
                    let w = val(*p).cols();
                    accumulate(grads, *p, g.slice_cols(start, w));
                    start += w;
                }
            }
            Op::Mse(a, target) => {
                let x = val(*a);
                let scale = g[(0, 0)] * T::lit(2.0) / T::from_usize_lossy(x.data().len());
                accumulate(grads, *a, x.zip_map(target, |p, t| (p - t) * scale));
            }
        }
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Mat<T>>], v: Var, g: Mat<T>) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn elu1<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + T::one()
    } else {
        x.exp()
    }
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn guard<T: Real>(d: T) -> T {
    let eps = T::lit(DENOMINATOR_EPS);
    if d < eps {
        d + eps
    } else {
        d
    }
}

/// Row mean and reciprocal standard deviation (population variance plus
/// the layer-norm floor).
fn row_moments<T: Real>(row: &[T]) -> (T, T) {
    let c = T::from_usize_lossy(row.len());
    let mean = row.iter().copied().sum::<T>() / c;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / c;
    (mean, T::one() / (var + T::lit(LAYER_NORM_EPS)).sqrt())
}

pub(crate) fn normalize_rows<T: Real>(x: &Mat<T>) -> Mat<T> {
    let mut out = Mat::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let (mean, inv_std) = row_moments(x.row(i));
        for j in 0..x.cols() {
            out[(i, j)] = (x[(i, j)] - mean) * inv_std;
        }
    }
    out
}
