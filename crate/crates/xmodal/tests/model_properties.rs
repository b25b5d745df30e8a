use perdyn_core::{TraitVector, WindowConfig};
use perdyn_xmodal::{
    cross_modal_block, forward_scores, linear_attention, load, save, train, trait_trajectory, Block, FeatureTrack,
    HyperConfig, Mat64, ModalitySequence64, Modality, ModelParams64, ModelShape, Sample64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Mat64 {
    Mat64::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

fn phi(x: f64) -> f64 {
    if x > 0.0 {
        x + 1.0
    } else {
        x.exp()
    }
}

/// Full `Tq x Tk` kernel weight matrix, normalized per query.
fn quadratic_attention(q: &Mat64, k: &Mat64, v: &Mat64) -> Mat64 {
    let mut out = Mat64::zeros(q.rows(), v.cols());
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

/// Normwise relative error: largest absolute deviation over the largest
/// reference magnitude.
fn max_rel(a: &Mat64, b: &Mat64) -> f64 {
    let diff = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    diff / b.data().iter().map(|y| y.abs()).fold(f64::MIN_POSITIVE, f64::max)
}

#[test]
fn streaming_equals_quadratic_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for d in [8, 32] {
        for t in 1..=64 {
            let tq = 1 + (t * 7) % 64;
            let q = random(&mut rng, tq, d, 2.0);
            let k = random(&mut rng, t, d, 2.0);
            let v = random(&mut rng, t, d, 2.0);
            let err = max_rel(&linear_attention(&q, &k, &v).unwrap(), &quadratic_attention(&q, &k, &v));
            assert!(err < 1e-10, "T={t} d={d}: {err}");
        }
    }
}

/// Straight-line block: explicit loops, per-head quadratic attention.
fn reference_block(x: &Mat64, s: &Mat64, b: &Block<Mat64>, heads: usize) -> Mat64 {
    let lin = |m: &Mat64, w: &Mat64, bias: &Mat64| {
        Mat64::from_fn(m.rows(), w.cols(), |i, j| {
            bias[(0, j)] + (0..m.cols()).map(|k| m[(i, k)] * w[(k, j)]).sum::<f64>()
        })
    };
    let ln = |m: &Mat64, g: &Mat64, bias: &Mat64| {
        Mat64::from_fn(m.rows(), m.cols(), |i, j| {
            let row = m.row(i);
            let mu = row.iter().sum::<f64>() / row.len() as f64;
            let var = row.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / row.len() as f64;
            g[(0, j)] * (m[(i, j)] - mu) / (var + 1e-5).sqrt() + bias[(0, j)]
        })
    };
    let d = x.cols();
    let hd = d / heads;
    let q = lin(x, &b.wq, &b.bq);
    let k = lin(s, &b.wk, &b.bk);
    let v = lin(s, &b.wv, &b.bv);
    let mut att = Mat64::zeros(x.rows(), d);
    for h in 0..heads {
        let cols = |m: &Mat64| Mat64::from_fn(m.rows(), hd, |i, j| m[(i, h * hd + j)]);
        let o = quadratic_attention(&cols(&q), &cols(&k), &cols(&v));
        for i in 0..x.rows() {
            for j in 0..hd {
                att[(i, h * hd + j)] = o[(i, j)];
            }
        }
    }
    let att = lin(&att, &b.wo, &b.bo);
    let h1 = ln(&Mat64::from_fn(x.rows(), d, |i, j| x[(i, j)] + att[(i, j)]), &b.ln1_gain, &b.ln1_bias);
    let f = lin(&h1, &b.ff1_w, &b.ff1_b).map(|v| v.max(0.0));
    let f = lin(&f, &b.ff2_w, &b.ff2_b);
    ln(&Mat64::from_fn(x.rows(), d, |i, j| h1[(i, j)] + f[(i, j)]), &b.ln2_gain, &b.ln2_bias)
}

fn toy_shape() -> ModelShape {
    ModelShape {
        d: 8,
        heads: 2,
        layers: 1,
        input_dims: [4, 6, 3],
    }
}

#[test]
fn cross_block_matches_reference() {
    let mut p = ModelParams64::init(toy_shape(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // non-trivial norm parameters and biases
    for m in p.weights.refs_mut() {
        if m.rows() == 1 {
            *m = Mat64::from_fn(1, m.cols(), |_, _| rng.random_range(0.5..1.5));
        }
    }
    let b = &p.weights.cross[1].layers[0];
    let x = random(&mut rng, 3, 8, 1.0);
    let s = random(&mut rng, 4, 8, 1.0);
    let out = cross_modal_block(&x, &s, b, 2).unwrap();
    assert_eq!(out.shape(), (3, 8));
    assert!(max_rel(&out, &reference_block(&x, &s, b, 2)) < 1e-8);
    let selfish = cross_modal_block(&x, &x, b, 2).unwrap();
    assert!(selfish.is_finite());
}

fn inputs(rng: &mut ChaCha8Rng, lens: [usize; 3], scale: f64) -> [ModalitySequence64; 3] {
    let dims = toy_shape().input_dims;
    std::array::from_fn(|i| ModalitySequence64::new(Modality::ALL[i], random(rng, lens[i], dims[i], scale)).unwrap())
}

#[test]
fn visual_order_does_not_matter() {
    let p = ModelParams64::init(toy_shape(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = inputs(&mut rng, [5, 4, 6], 1.0);
    let base = forward_scores(&x, &p).unwrap();
    let mut shuffled = x.clone();
    let order = [3, 0, 5, 1, 4, 2];
    shuffled[2] = ModalitySequence64::new(Modality::Visual, x[2].data().select_rows(&order)).unwrap();
    let moved = forward_scores(&shuffled, &p).unwrap();
    assert!(max_rel(&moved, &base) < 1e-9);
}

#[test]
fn repeating_acoustic_steps_does_not_matter() {
    let p = ModelParams64::init(toy_shape(), 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = inputs(&mut rng, [5, 3, 4], 1.0);
    let base = forward_scores(&x, &p).unwrap();
    let mut doubled = x.clone();
    let idx: Vec<usize> = (0..5).flat_map(|i| [i, i]).collect();
    doubled[0] = ModalitySequence64::new(Modality::Acoustic, x[0].data().select_rows(&idx)).unwrap();
    let out = forward_scores(&doubled, &p).unwrap();
    assert!(max_rel(&out, &base) < 1e-9);
}

#[test]
fn fuzzed_outputs_in_open_unit_interval() {
    let p = ModelParams64::init(toy_shape(), 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let lens = [rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..6)];
        let scale = rng.random_range(0.01..10.0);
        let out = forward_scores(&inputs(&mut rng, lens, scale), &p).unwrap();
        assert!(out.data().iter().all(|&v| v > 0.0 && v < 1.0 && v.is_finite()));
    }
}

fn overfit_set() -> Vec<Sample64> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    (0..8)
        .map(|_| Sample64 {
            inputs: inputs(&mut rng, [4, 3, 5], 1.0),
            target: TraitVector::from_array(std::array::from_fn(|_| rng.random_range(0.1..0.9))).unwrap(),
        })
        .collect()
}

#[test]
fn overfits_eight_samples() {
    let hyper = HyperConfig {
        d: 8,
        heads: 2,
        layers: 1,
        learning_rate: 1e-2,
        epochs: 200,
        seed: 1,
    };
    let data = overfit_set();
    let a = train(&data, &hyper).unwrap();
    let last = *a.loss_curve.last().unwrap();
    assert!(last < 0.01, "final loss {last}");
    let b = train(&data, &hyper).unwrap();
    assert_eq!(a.params, b.params);
    assert!(a.loss_curve.iter().zip(&b.loss_curve).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn saved_params_reproduce_trajectories() {
    let p = ModelParams64::init(toy_shape(), 12).unwrap();
    let mut buf = Vec::new();
    save(&p, &mut buf).unwrap();
    let q: ModelParams64 = load(buf.as_slice()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let dims = toy_shape().input_dims;
    let tracks: [FeatureTrack<f64>; 3] = std::array::from_fn(|i| {
        // 95 s of frames at 2 Hz
        let times: Vec<f64> = (0..190).map(|t| t as f64 * 0.5).collect();
        FeatureTrack::new(Modality::ALL[i], times, random(&mut rng, 190, dims[i], 1.0)).unwrap()
    });
    let cfg = WindowConfig::default();
    let a = trait_trajectory("p0", &tracks, &p, &cfg).unwrap();
    let b = trait_trajectory("p0", &tracks, &q, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 3);
}
