//! A desk-scale linear multimodal transformer for per-window trait
//! estimation.
//!
//! Acoustic, textual and visual feature sequences are projected to a common
//! width. Each modality then attends to the other two through its own
//! cross-modal block (six blocks in total), the two resulting streams are
//! fused by a self-attention layer and mean-pooled over time, and a linear
//! head with a logistic squashing maps the three pooled vectors to the five
//! trait scores. Attention is kernelized with `elu(x) + 1` and non-causal.
//!
//! Gradients come from a small reverse-mode tape over matrices; see
//! [`train`] and [`grad_check`].

pub mod error;
pub mod mat;
pub mod model;
pub mod params;
pub mod store;
pub mod tape;
pub mod train;
pub mod window;

pub use error::{Result, XmodalError};
pub use mat::Mat;
pub use model::{cross_modal_block, forward, forward_scores, linear_attention, ModalitySequence};
pub use params::{cross_pairs, Block, Inventory, Linear, Modality, ModelParams, ModelShape, Weights};
pub use store::{load, save};
pub use train::{
    grad_check, loss, loss_and_gradient, train, train_from, GradCheckConfig, GradCheckReport, HyperConfig, Sample,
    Trained,
};
pub use window::{recording_span, trait_trajectory, window_predictions, FeatureTrack};

pub type Mat64 = Mat<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type ModalitySequence64 = ModalitySequence<f64>;
pub type Sample64 = Sample<f64>;
pub type FeatureTrack64 = FeatureTrack<f64>;
