//! Linear attention, cross-modal blocks and the full forward pass.

use perdyn_core::{Real, TraitVector};

use crate::error::{invalid, Result, XmodalError};
use crate::mat::Mat;
use crate::params::{Block, Linear, Modality, ModelParams, Weights};
use crate::tape::{Tape, Var};

/// A feature matrix of one modality, `T_m` timesteps by `d_m` features.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalitySequence<T> {
    pub modality: Modality,
    data: Mat<T>,
}

impl<T: Real> ModalitySequence<T> {
    pub fn new(modality: Modality, data: Mat<T>) -> Result<Self> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(invalid(format!("{modality} sequence is empty")));
        }
        if !data.is_finite() {
            return Err(invalid(format!("{modality} sequence has non-finite entries")));
        }
        Ok(Self { modality, data })
    }

    pub fn data(&self) -> &Mat<T> {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }
}

/// Streaming linear attention on tape variables.
pub(crate) fn attend<T: Real>(t: &mut Tape<T>, q: Var, k: Var, v: Var) -> Var {
    let fq = t.elu1(q);
    let fk = t.elu1(k);
    let kv = t.matmul_tn(fk, v);
    let z = t.col_sum(fk);
    let num = t.matmul(fq, kv);
    let den = t.matmul_nt(fq, z);
    let den = t.guard_denominator(den);
    t.div_col(num, den)
}

fn check_attention_shapes<T: Real>(q: &Mat<T>, k: &Mat<T>, v: &Mat<T>) -> Result<()> {
    if q.cols() != k.cols() {
        return Err(invalid(format!("query width {} differs from key width {}", q.cols(), k.cols())));
    }
    if k.rows() != v.rows() {
        return Err(invalid(format!("{} keys but {} values", k.rows(), v.rows())));
    }
    if k.rows() == 0 || q.rows() == 0 {
        return Err(invalid("attention needs at least one query and one key"));
    }
    if !(q.is_finite() && k.is_finite() && v.is_finite()) {
        return Err(invalid("non-finite attention input"));
    }
    Ok(())
}

/// Non-causal linear attention with feature map `elu(x) + 1`:
/// `out_i = phi(q_i)^T S / phi(q_i)^T z` with `S = sum_j phi(k_j) v_j^T` and
/// `z = sum_j phi(k_j)`.
pub fn linear_attention<T: Real>(q: &Mat<T>, k: &Mat<T>, v: &Mat<T>) -> Result<Mat<T>> {
    check_attention_shapes(q, k, v)?;
    let mut t = Tape::new();
    let (q, k, v) = (t.leaf(q.clone()), t.leaf(k.clone()), t.leaf(v.clone()));
    let out = attend(&mut t, q, k, v);
    Ok(t.value(out).clone())
}

fn affine<T: Real>(t: &mut Tape<T>, x: Var, l: &Linear<Var>) -> Var {
    let y = t.matmul(x, l.w);
    t.add_row(y, l.b)
}

fn proj<T: Real>(t: &mut Tape<T>, x: Var, w: Var, b: Var) -> Var {
    let y = t.matmul(x, w);
    t.add_row(y, b)
}

fn norm<T: Real>(t: &mut Tape<T>, x: Var, gain: Var, bias: Var) -> Var {
    let y = t.layer_norm(x);
    let y = t.mul_row(y, gain);
    t.add_row(y, bias)
}

/// One transformer layer; `source == target` makes it self-attention.
pub(crate) fn block_layer<T: Real>(t: &mut Tape<T>, target: Var, source: Var, b: &Block<Var>, heads: usize) -> Var {
    let q = proj(t, target, b.wq, b.bq);
    let k = proj(t, source, b.wk, b.bk);
    let v = proj(t, source, b.wv, b.bv);
    let d = t.value(q).cols();
    let hd = d / heads;
    let per_head: Vec<Var> = (0..heads)
        .map(|h| {
            let qh = t.slice_cols(q, h * hd, hd);
            let kh = t.slice_cols(k, h * hd, hd);
            let vh = t.slice_cols(v, h * hd, hd);
            attend(t, qh, kh, vh)
        })
        .collect();
    let att = if heads == 1 { per_head[0] } else { t.concat_cols(&per_head) };
    let att = proj(t, att, b.wo, b.bo);
    let h = t.add(target, att);
    let h = norm(t, h, b.ln1_gain, b.ln1_bias);
    let f = proj(t, h, b.ff1_w, b.ff1_b);
    let f = t.relu(f);
    let f = proj(t, f, b.ff2_w, b.ff2_b);
    let out = t.add(h, f);
    norm(t, out, b.ln2_gain, b.ln2_bias)
}

fn bind_block<T: Real>(t: &mut Tape<T>, b: &Block<Mat<T>>) -> Block<Var> {
    b.map("", &mut |_, m| t.leaf(m.clone()))
}

/// One cross-modal layer: queries from `target`, keys and values from
/// `source`, both already at model dimension.
pub fn cross_modal_block<T: Real>(
    target: &Mat<T>,
    source: &Mat<T>,
    weights: &Block<Mat<T>>,
    heads: usize,
) -> Result<Mat<T>> {
    let d = weights.wq.rows();
    if target.cols() != d || source.cols() != d {
        return Err(invalid(format!(
            "block expects width {d}, got target {} and source {}",
            target.cols(),
            source.cols()
        )));
    }
    if heads == 0 || d % heads != 0 {
        return Err(invalid(format!("{heads} heads do not divide width {d}")));
    }
    check_attention_shapes(target, source, source)?;
    let mut t = Tape::new();
    let b = bind_block(&mut t, weights);
    let (x, s) = (t.leaf(target.clone()), t.leaf(source.clone()));
    let out = block_layer(&mut t, x, s, &b, heads);
    Ok(t.value(out).clone())
}

/// Tape variables for every parameter tensor.
pub(crate) fn bind<T: Real>(t: &mut Tape<T>, params: &ModelParams<T>) -> Weights<Var> {
    params.weights.map(|_, m| t.leaf(m.clone()))
}

fn finite<T: Real>(t: &Tape<T>, v: Var, layer: impl FnOnce() -> String) -> Result<Var> {
    if t.value(v).is_finite() {
        Ok(v)
    } else {
        Err(XmodalError::Numeric { layer: layer() })
    }
}

/// Checks modality order and feature widths against the model.
pub(crate) fn check_inputs<T: Real>(inputs: &[ModalitySequence<T>; 3], params: &ModelParams<T>) -> Result<()> {
    for ((seq, m), &dim) in inputs.iter().zip(Modality::ALL).zip(&params.shape.input_dims) {
        if seq.modality != m {
            return Err(invalid(format!("expected {m} sequence in position {}, got {}", m.index(), seq.modality)));
        }
        if seq.data.cols() != dim {
            return Err(invalid(format!("{m} features have width {}, model expects {dim}", seq.data.cols())));
        }
    }
    Ok(())
}

/// Builds the whole network on `t` and returns the `1 x 5` output in (0, 1).
pub(crate) fn forward_graph<T: Real>(
    t: &mut Tape<T>,
    w: &Weights<Var>,
    params: &ModelParams<T>,
    inputs: &[ModalitySequence<T>; 3],
) -> Result<Var> {
    let heads = params.shape.heads;
    let mut projected = Vec::with_capacity(3);
    for (seq, (l, m)) in inputs.iter().zip(w.input.iter().zip(Modality::ALL)) {
        let x = t.leaf(seq.data.clone());
        let y = affine(t, x, l);
        projected.push(finite(t, y, || format!("input.{m}"))?);
    }

    let mut streams: Vec<Vec<Var>> = vec![Vec::new(); 3];
    for c in &w.cross {
        let src = projected[c.source.index()];
        let mut h = projected[c.target.index()];
        for (i, b) in c.layers.iter().enumerate() {
            h = block_layer(t, h, src, b, heads);
            h = finite(t, h, || format!("cross.{}_from_{}.{i}", c.target, c.source))?;
        }
        streams[c.target.index()].push(h);
    }

    let mut pooled = Vec::with_capacity(3);
    for f in &w.fusion {
        let both = t.concat_cols(&streams[f.target.index()]);
        let mut h = affine(t, both, &f.proj);
        for (i, b) in f.layers.iter().enumerate() {
            h = block_layer(t, h, h, b, heads);
            h = finite(t, h, || format!("fusion.{}.{i}", f.target))?;
        }
        pooled.push(t.mean_rows(h));
    }

    let all = t.concat_cols(&pooled);
    let logits = affine(t, all, &w.head);
    let logits = finite(t, logits, || "head".to_string())?;
    Ok(t.sigmoid(logits))
}

/// Five trait scores for one window of the three modalities, given in
/// acoustic, textual, visual order.
pub fn forward<T: Real>(inputs: &[ModalitySequence<T>; 3], params: &ModelParams<T>) -> Result<TraitVector<T>> {
    let out = forward_scores(inputs, params)?;
    let s: [T; 5] = std::array::from_fn(|j| out[(0, j)]);
    Ok(TraitVector::from_array(s)?)
}

/// As [`forward`], returning the raw `1 x 5` matrix.
pub fn forward_scores<T: Real>(inputs: &[ModalitySequence<T>; 3], params: &ModelParams<T>) -> Result<Mat<T>> {
    check_inputs(inputs, params)?;
    let mut t = Tape::new();
    let w = bind(&mut t, params);
    let out = forward_graph(&mut t, &w, params, inputs)?;
    Ok(t.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelShape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat<f64> {
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Materializes the full kernel weight matrix.
    fn quadratic(q: &Mat<f64>, k: &Mat<f64>, v: &Mat<f64>) -> Mat<f64> {
        let phi = |x: f64| if x > 0.0 { x + 1.0 } else { x.exp() };
        let mut out = Mat::zeros(q.rows(), v.cols());
        for i in 0..q.rows() {
            let w: Vec<f64> = (0..k.rows())
                .map(|j| (0..q.cols()).map(|c| phi(q[(i, c)]) * phi(k[(j, c)])).sum())
                .collect();
            let total: f64 = w.iter().sum();
            for c in 0..v.cols() {
                out[(i, c)] = (0..k.rows()).map(|j| w[j] * v[(j, c)]).sum::<f64>() / total;
            }
        }
        out
    }

    #[test]
    fn streaming_matches_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (q, k, v) = (random(&mut rng, 5, 8), random(&mut rng, 5, 8), random(&mut rng, 5, 8));
        let a = linear_attention(&q, &k, &v).unwrap();
        let b = quadratic(&q, &k, &v);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= 1e-10 * y.abs().max(1e-300));
        }
    }

    #[test]
    fn single_key_and_identical_keys() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random(&mut rng, 4, 6);
        let k = random(&mut rng, 1, 6);
        let v = random(&mut rng, 1, 6);
        let out = linear_attention(&q, &k, &v).unwrap();
        for i in 0..4 {
            for c in 0..6 {
                assert!((out[(i, c)] - v[(0, c)]).abs() <= 1e-12 * v[(0, c)].abs().max(1.0));
            }
        }
        let k = Mat::from_fn(3, 6, |_, c| 0.1 * c as f64);
        let v = random(&mut rng, 3, 6);
        let mean = v.col_sum().map(|s| s / 3.0);
        let out = linear_attention(&q, &k, &v).unwrap();
        for i in 0..4 {
            for c in 0..6 {
                assert!((out[(i, c)] - mean[(0, c)]).abs() < 1e-12);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn outputs_are_convex_combinations_of_values(
            tq in 1usize..6, tk in 1usize..6, seed in 0u64..1000, scale in 0.1f64..10.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random(&mut rng, tq, 4).map(|x| x * scale);
            let k = random(&mut rng, tk, 4).map(|x| x * scale);
            let v = random(&mut rng, tk, 3);
            let out = linear_attention(&q, &k, &v).unwrap();
            for c in 0..3 {
                let col: Vec<f64> = (0..tk).map(|j| v[(j, c)]).collect();
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for i in 0..tq {
                    proptest::prop_assert!(out[(i, c)] >= lo - 1e-12 && out[(i, c)] <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn attention_shape_errors() {
        let a = Mat::<f64>::zeros(2, 3);
        let b = Mat::<f64>::zeros(2, 4);
        assert!(linear_attention(&a, &b, &b).is_err());
        assert!(linear_attention(&a, &a, &Mat::zeros(3, 3)).is_err());
    }

    fn toy_params(seed: u64) -> ModelParams<f64> {
        let shape = ModelShape {
            d: 8,
            heads: 2,
            layers: 1,
            input_dims: [3, 5, 2],
        };
        ModelParams::init(shape, seed).unwrap()
    }

    fn toy_inputs(rng: &mut ChaCha8Rng, lens: [usize; 3]) -> [ModalitySequence<f64>; 3] {
        let dims = [3, 5, 2];
        std::array::from_fn(|i| ModalitySequence::new(Modality::ALL[i], random(rng, lens[i], dims[i])).unwrap())
    }

    #[test]
    fn zero_residual_branches_leave_normalized_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut b = toy_params(1).weights.cross[0].layers[0].clone();
        for m in [&mut b.wo, &mut b.bo, &mut b.ff2_w, &mut b.ff2_b] {
            *m = Mat::zeros(m.rows(), m.cols());
        }
        let x = random(&mut rng, 3, 8);
        let s = random(&mut rng, 4, 8);
        let out = cross_modal_block(&x, &s, &b, 2).unwrap();
        let ln = crate::tape::normalize_rows(&x);
        for (a, e) in out.data().iter().zip(ln.data()) {
            assert!((a - e).abs() < 1e-4, "{a} vs {e}");
        }
    }

    #[test]
    fn forward_in_unit_interval() {
        let p = toy_params(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let out = forward(&toy_inputs(&mut rng, [3, 2, 4]), &p).unwrap();
        assert!(out.as_array().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn forward_rejects_wrong_widths() {
        let p = toy_params(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut inputs = toy_inputs(&mut rng, [3, 2, 4]);
        inputs[1] = ModalitySequence::new(Modality::Textual, random(&mut rng, 2, 4)).unwrap();
        assert!(matches!(forward(&inputs, &p), Err(XmodalError::Validation(_))));
        inputs.swap(0, 2);
        assert!(forward(&inputs, &p).is_err());
    }

    #[test]
    fn non_finite_weights_name_the_layer() {
        let mut p = toy_params(2);
        p.weights.cross[3].layers[0].wq[(0, 0)] = f64::NAN;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        match forward(&toy_inputs(&mut rng, [2, 2, 2]), &p) {
            Err(XmodalError::Numeric { layer }) => assert_eq!(layer, "cross.textual_from_visual.0"),
            other => panic!("{other:?}"),
        }
    }
}
