//! Domain types and temporal aggregation for perceived-personality dynamics
//! in small groups.
//!
//! Per-stride trait predictions are averaged into fixed-length snapshots,
//! snapshots into per-participant session averages, and participants into
//! group averages. Plasticity and stability are derived as unit-weight sums
//! of the big-five traits.
//!
//! Numeric code is generic over [`Real`]; the `*64` aliases below fix the
//! scalar to `f64`, which is what the command line uses.

pub mod error;
pub mod io;
pub mod real;
pub mod session;
pub mod synth;
pub mod trajectory;
pub mod traits;

pub use error::{CoreError, ErrorClass, Result};
pub use real::Real;
pub use session::{SessionRow, SessionTable};
pub use trajectory::{group_average, session_average, snapshot_series, TraitTrajectory, WindowConfig};
pub use traits::{meta_traits, MetaTraitVector, Trait, TraitSet, TraitVector, Variable};

pub type TraitVector64 = TraitVector<f64>;
pub type MetaTraitVector64 = MetaTraitVector<f64>;
pub type TraitTrajectory64 = TraitTrajectory<f64>;
pub type SessionTable64 = SessionTable<f64>;
