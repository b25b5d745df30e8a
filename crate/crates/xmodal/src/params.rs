//! Parameter layout of the model.
//!
//! The same structure holds matrices, tape variables, shape specs or Adam
//! moments, so every traversal (initialization, binding, updates,
//! serialization) walks tensors in one fixed order.

use std::fmt;
use std::str::FromStr;

use perdyn_core::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mat::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Acoustic,
    Textual,
    Visual,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Acoustic, Modality::Textual, Modality::Visual];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Acoustic => "acoustic",
            Modality::Textual => "textual",
            Modality::Visual => "visual",
        }
    }

    /// eGeMAPS functionals, BERT embedding width, action-unit intensities.
    pub fn default_dim(self) -> usize {
        match self {
            Modality::Acoustic => 88,
            Modality::Textual => 768,
            Modality::Visual => 17,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = crate::error::XmodalError;

    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown modality `{s}`")))
    }
}

/// Architecture dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub d: usize,
    pub heads: usize,
    /// Transformer layers in every cross-modal and fusion block.
    pub layers: usize,
    /// Feature width per modality, in [`Modality::ALL`] order.
    pub input_dims: [usize; 3],
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            d: 32,
            heads: 4,
            layers: 1,
            input_dims: Modality::ALL.map(Modality::default_dim),
        }
    }
}

impl ModelShape {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.heads == 0 || self.d % self.heads != 0 {
            return Err(invalid(format!(
                "model dimension {} must be a positive multiple of the head count {}",
                self.d, self.heads
            )));
        }
        if self.layers == 0 {
            return Err(invalid("at least one layer per block is required"));
        }
        if self.input_dims.contains(&0) {
            return Err(invalid("input feature dimensions must be positive"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d / self.heads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Weight,
    Bias,
    Gain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub rows: usize,
    pub cols: usize,
    pub kind: TensorKind,
}

impl TensorSpec {
    fn weight(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            kind: TensorKind::Weight,
        }
    }

    fn bias(cols: usize) -> Self {
        Self {
            rows: 1,
            cols,
            kind: TensorKind::Bias,
        }
    }

    fn gain(cols: usize) -> Self {
        Self {
            rows: 1,
            cols,
            kind: TensorKind::Gain,
        }
    }
}

macro_rules! param_group {
    ($(#[$meta:meta])* $name:ident { $($field:ident),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name<P> {
            $(pub $field: P,)*
        }

        impl<P> $name<P> {
            pub fn map<Q>(&self, prefix: &str, f: &mut impl FnMut(&str, &P) -> Q) -> $name<Q> {
                $name {
                    $($field: f(&format!("{prefix}.{}", stringify!($field)), &self.$field),)*
                }
            }

            pub fn refs<'a>(&'a self, out: &mut Vec<&'a P>) {
                $(out.push(&self.$field);)*
            }

            pub fn refs_mut<'a>(&'a mut self, out: &mut Vec<&'a mut P>) {
                $(out.push(&mut self.$field);)*
            }
        }
    };
}

param_group!(
    /// Affine map `x w + b`.
    Linear { w, b }
);

param_group!(
    /// One post-norm transformer layer: multi-head linear attention with
    /// residual and layer norm, then a ReLU feed-forward with residual and
    /// layer norm.
    Block {
        wq, bq, wk, bk, wv, bv, wo, bo,
        ln1_gain, ln1_bias,
        ff1_w, ff1_b, ff2_w, ff2_b,
        ln2_gain, ln2_bias,
    }
);

impl Block<TensorSpec> {
    pub fn layout(d: usize) -> Self {
        let w = TensorSpec::weight(d, d);
        let b = TensorSpec::bias(d);
        Block {
            wq: w,
            bq: b,
            wk: w,
            bk: b,
            wv: w,
            bv: b,
            wo: w,
            bo: b,
            ln1_gain: TensorSpec::gain(d),
            ln1_bias: b,
            ff1_w: TensorSpec::weight(d, 2 * d),
            ff1_b: TensorSpec::bias(2 * d),
            ff2_w: TensorSpec::weight(2 * d, d),
            ff2_b: b,
            ln2_gain: TensorSpec::gain(d),
            ln2_bias: b,
        }
    }
}

/// Queries from `target`, keys and values from `source`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossBlock<P> {
    pub target: Modality,
    pub source: Modality,
    pub layers: Vec<Block<P>>,
}

/// Projects the two cross-modal streams of `target` (concatenated, width
/// `2d`) back to `d`, then self-attention layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Fusion<P> {
    pub target: Modality,
    pub proj: Linear<P>,
    pub layers: Vec<Block<P>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights<P> {
    /// Per-modality projection to the model dimension.
    pub input: Vec<Linear<P>>,
    pub cross: Vec<CrossBlock<P>>,
    pub fusion: Vec<Fusion<P>>,
    /// Pooled `3d` to the five trait logits.
    pub head: Linear<P>,
}

/// Ordered (target, source) pairs, every modality attending to both others.
pub fn cross_pairs() -> Vec<(Modality, Modality)> {
    let mut out = Vec::with_capacity(6);
    for t in Modality::ALL {
        for s in Modality::ALL {
            if s != t {
                out.push((t, s));
            }
        }
    }
    out
}

impl<P> Weights<P> {
    pub fn map<Q>(&self, mut f: impl FnMut(&str, &P) -> Q) -> Weights<Q> {
        let input = self
            .input
            .iter()
            .zip(Modality::ALL)
            .map(|(l, m)| l.map(&format!("input.{m}"), &mut f))
            .collect();
        let cross = self
            .cross
            .iter()
            .map(|c| CrossBlock {
                target: c.target,
                source: c.source,
                layers: c
                    .layers
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b.map(&format!("cross.{}_from_{}.{i}", c.target, c.source), &mut f))
                    .collect(),
            })
            .collect();
        let fusion = self
            .fusion
            .iter()
            .map(|u| Fusion {
                target: u.target,
                proj: u.proj.map(&format!("fusion.{}.proj", u.target), &mut f),
                layers: u
                    .layers
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b.map(&format!("fusion.{}.{i}", u.target), &mut f))
                    .collect(),
            })
            .collect();
        let head = self.head.map("head", &mut f);
        Weights {
            input,
            cross,
            fusion,
            head,
        }
    }

    /// Every tensor, in the same order as [`Weights::map`] visits them.
    pub fn refs(&self) -> Vec<&P> {
        let mut out = Vec::new();
        for l in &self.input {
            l.refs(&mut out);
        }
        for c in &self.cross {
            for b in &c.layers {
                b.refs(&mut out);
            }
        }
        for u in &self.fusion {
            u.proj.refs(&mut out);
            for b in &u.layers {
                b.refs(&mut out);
            }
        }
        self.head.refs(&mut out);
        out
    }

    pub fn refs_mut(&mut self) -> Vec<&mut P> {
        let mut out = Vec::new();
        for l in &mut self.input {
            l.refs_mut(&mut out);
        }
        for c in &mut self.cross {
            for b in &mut c.layers {
                b.refs_mut(&mut out);
            }
        }
        for u in &mut self.fusion {
            u.proj.refs_mut(&mut out);
            for b in &mut u.layers {
                b.refs_mut(&mut out);
            }
        }
        self.head.refs_mut(&mut out);
        out
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.map(|n, _| names.push(n.to_string()));
        names
    }
}

impl Weights<TensorSpec> {
    pub fn layout(shape: &ModelShape) -> Self {
        let d = shape.d;
        let blocks = || (0..shape.layers).map(|_| Block::layout(d)).collect::<Vec<_>>();
        Weights {
            input: shape
                .input_dims
                .iter()
                .map(|&din| Linear {
                    w: TensorSpec::weight(din, d),
                    b: TensorSpec::bias(d),
                })
                .collect(),
            cross: cross_pairs()
                .into_iter()
                .map(|(target, source)| CrossBlock {
                    target,
                    source,
                    layers: blocks(),
                })
                .collect(),
            fusion: Modality::ALL
                .into_iter()
                .map(|target| Fusion {
                    target,
                    proj: Linear {
                        w: TensorSpec::weight(2 * d, d),
                        b: TensorSpec::bias(d),
                    },
                    layers: blocks(),
                })
                .collect(),
            head: Linear {
                w: TensorSpec::weight(3 * d, 5),
                b: TensorSpec::bias(5),
            },
        }
    }
}

/// Trainable parameters together with the shape they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub shape: ModelShape,
    pub weights: Weights<Mat<T>>,
}

/// Parameter census.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inventory {
    pub cross_blocks: Vec<(Modality, Modality)>,
    pub fusion_blocks: Vec<Modality>,
    pub tensors: usize,
    pub parameters: usize,
}

impl<T: Real> ModelParams<T> {
    /// Xavier-uniform weights from a seeded ChaCha stream; zero biases,
    /// unit layer-norm gains.
    pub fn init(shape: ModelShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = Weights::layout(&shape).map(|_, spec| match spec.kind {
            TensorKind::Weight => {
                let a = (6.0 / (spec.rows + spec.cols) as f64).sqrt();
                Mat::from_fn(spec.rows, spec.cols, |_, _| T::lit(rng.random_range(-a..a)))
            }
            TensorKind::Bias => Mat::zeros(spec.rows, spec.cols),
            TensorKind::Gain => Mat::filled(spec.rows, spec.cols, T::one()),
        });
        Ok(Self { shape, weights })
    }

    /// Checks that every tensor matches the layout of `shape` and is finite.
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        let layout = Weights::layout(&self.shape);
        let specs = layout.refs();
        let names = layout.names();
        let tensors = self.weights.refs();
        if specs.len() != tensors.len() {
            return Err(invalid(format!(
                "expected {} tensors, found {}",
                specs.len(),
                tensors.len()
            )));
        }
        for ((spec, m), name) in specs.iter().zip(&tensors).zip(&names) {
            if m.shape() != (spec.rows, spec.cols) {
                return Err(invalid(format!(
                    "{name}: shape {:?}, expected ({}, {})",
                    m.shape(),
                    spec.rows,
                    spec.cols
                )));
            }
            if !m.is_finite() {
                return Err(invalid(format!("{name}: non-finite entry")));
            }
        }
        Ok(())
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.refs().iter().map(|m| m.data().len()).sum()
    }

    pub fn inventory(&self) -> Inventory {
        Inventory {
            cross_blocks: self.weights.cross.iter().map(|c| (c.target, c.source)).collect(),
            fusion_blocks: self.weights.fusion.iter().map(|f| f.target).collect(),
            tensors: self.weights.refs().len(),
            parameters: self.n_parameters(),
        }
    }
}
