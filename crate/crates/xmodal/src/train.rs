//! Mean-squared-error training with Adam and finite-difference gradient
//! verification.

use perdyn_core::{Real, TraitVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, XmodalError};
use crate::mat::Mat;
use crate::model::{bind, check_inputs, forward_graph, ModalitySequence};
use crate::params::{ModelParams, ModelShape, Weights};
use crate::tape::Tape;

/// One training example: a window of the three modalities and its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub inputs: [ModalitySequence<T>; 3],
    pub target: TraitVector<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub d: usize,
    pub heads: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for HyperConfig {
    fn default() -> Self {
        Self {
            d: 32,
            heads: 4,
            layers: 1,
            learning_rate: 1e-3,
            epochs: 100,
            seed: 0,
        }
    }
}

impl HyperConfig {
    pub fn shape(&self, input_dims: [usize; 3]) -> ModelShape {
        ModelShape {
            d: self.d,
            heads: self.heads,
            layers: self.layers,
            input_dims,
        }
    }
}

/// Adam moment decay rates and denominator floor.
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Trained<T> {
    pub params: ModelParams<T>,
    /// Full-batch loss before the first update and after every epoch.
    pub loss_curve: Vec<f64>,
}

fn target_row<T: Real>(v: &TraitVector<T>) -> Mat<T> {
    Mat::from_fn(1, 5, |_, j| v.as_array()[j])
}

/// Mean over the batch of per-sample mean squared error.
pub fn loss<T: Real>(params: &ModelParams<T>, batch: &[Sample<T>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let mut total = 0.0;
    for s in batch {
        check_inputs(&s.inputs, params)?;
        let mut t = Tape::new();
        let w = bind(&mut t, params);
        let out = forward_graph(&mut t, &w, params, &s.inputs)?;
        let l = t.mse(out, target_row(&s.target));
        total += t.value(l)[(0, 0)].as_f64();
    }
    Ok(total / batch.len() as f64)
}

/// Batch loss and its gradient with respect to every parameter tensor.
pub fn loss_and_gradient<T: Real>(params: &ModelParams<T>, batch: &[Sample<T>]) -> Result<(f64, Weights<Mat<T>>)> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let mut grad = params.weights.map(|_, m| Mat::zeros(m.rows(), m.cols()));
    let mut total = 0.0;
    let scale = T::one() / T::from_usize_lossy(batch.len());
    for s in batch {
        check_inputs(&s.inputs, params)?;
        let mut t = Tape::new();
        let w = bind(&mut t, params);
        let out = forward_graph(&mut t, &w, params, &s.inputs)?;
        let l = t.mse(out, target_row(&s.target));
        total += t.value(l)[(0, 0)].as_f64();
        let g = t.backward(l);
        for (acc, v) in grad.refs_mut().into_iter().zip(w.refs()) {
            if let Some(gv) = &g[v.index()] {
                acc.add_assign(&gv.map(|x| x * scale));
            }
        }
    }
    Ok((total / batch.len() as f64, grad))
}

/// Trains a freshly initialized model on the full batch.
pub fn train<T: Real>(dataset: &[Sample<T>], hyper: &HyperConfig) -> Result<Trained<T>> {
    let first = dataset.first().ok_or_else(|| invalid("empty training set"))?;
    let dims = [0, 1, 2].map(|i| first.inputs[i].data().cols());
    let params = ModelParams::init(hyper.shape(dims), hyper.seed)?;
    train_from(params, dataset, hyper)
}

/// Continues training `params` with Adam for `hyper.epochs` full-batch steps.
pub fn train_from<T: Real>(mut params: ModelParams<T>, dataset: &[Sample<T>], hyper: &HyperConfig) -> Result<Trained<T>> {
    if dataset.is_empty() {
        return Err(invalid("empty training set"));
    }
    if !(hyper.learning_rate >= 0.0) || !hyper.learning_rate.is_finite() {
        return Err(invalid("learning rate must be finite and non-negative"));
    }
    let zeros = || params.weights.map(|_, m| Mat::<T>::zeros(m.rows(), m.cols()));
    let (mut m1, mut m2) = (zeros(), zeros());
    let lr = T::lit(hyper.learning_rate);
    let (b1, b2, eps) = (T::lit(BETA1), T::lit(BETA2), T::lit(ADAM_EPS));
    let mut curve = Vec::with_capacity(hyper.epochs + 1);

    for epoch in 0..hyper.epochs {
        let (l, grad) = loss_and_gradient(&params, dataset)?;
        if !l.is_finite() {
            return Err(XmodalError::Divergence { epoch, loss: l });
        }
        curve.push(l);
        let step = i32::try_from(epoch + 1).unwrap_or(i32::MAX);
        let c1 = T::one() - b1.powi(step);
        let c2 = T::one() - b2.powi(step);
        let tensors = params.weights.refs_mut().into_iter();
        let moments = m1.refs_mut().into_iter().zip(m2.refs_mut());
        for ((p, (m, v)), g) in tensors.zip(moments).zip(grad.refs()) {
            for (((p, m), v), &g) in p.data_mut().iter_mut().zip(m.data_mut()).zip(v.data_mut()).zip(g.data()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *p = *p - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
    }
    let last = loss(&params, dataset)?;
    if !last.is_finite() {
        return Err(XmodalError::Divergence {
            epoch: hyper.epochs,
            loss: last,
        });
    }
    curve.push(last);
    Ok(Trained { params, loss_curve: curve })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub coordinates: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            coordinates: 200,
            step: 1e-5,
            seed: 0,
        }
    }
}

/// Relative errors below this magnitude of both gradients are measured
/// against the floor instead, so round-off on vanishing entries does not
/// dominate.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckEntry {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub entries: Vec<GradCheckEntry>,
}

/// Compares analytic gradients of the batch loss with central differences
/// on a seeded sample of parameter coordinates.
pub fn grad_check(params: &ModelParams<f64>, batch: &[Sample<f64>], cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let (_, grad) = loss_and_gradient(params, batch)?;
    let names = params.weights.names();
    let sizes: Vec<usize> = params.weights.refs().iter().map(|m| m.data().len()).collect();
    let total: usize = sizes.iter().sum();
    let n = cfg.coordinates.min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picks = sample(&mut rng, total, n).into_vec();
    picks.sort_unstable();

    let locate = |mut flat: usize| {
        for (ti, &s) in sizes.iter().enumerate() {
            if flat < s {
                return (ti, flat);
            }
            flat -= s;
        }
        unreachable!("index within parameter count")
    };
    let grads = grad.refs();
    let mut entries = Vec::with_capacity(n);
    for flat in picks {
        let (ti, idx) = locate(flat);
        let eval = |delta: f64| {
            let mut p = params.clone();
            p.weights.refs_mut()[ti].data_mut()[idx] += delta;
            loss(&p, batch)
        };
        let numeric = (eval(cfg.step)? - eval(-cfg.step)?) / (2.0 * cfg.step);
        let analytic = grads[ti].data()[idx];
        let relative_error = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        entries.push(GradCheckEntry {
            tensor: names[ti].clone(),
            index: idx,
            analytic,
            numeric,
            relative_error,
        });
    }
    let max_relative_error = entries.iter().map(|e| e.relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_relative_error,
        entries,
    })
}
