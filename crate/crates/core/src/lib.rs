//! Stabilized POD-Galerkin reduced-order models.
//!
//! The crate builds quadratic Galerkin ROMs from snapshots of a full-order
//! model, adds a Lyapunov-based robust closure term and tunes the closure
//! amplitudes with multi-parametric extremum seeking.
//!
//! * [`truth`]: full-order models and snapshot collection
//! * [`pod`]: POD basis by the method of snapshots
//! * [`rom`]: Galerkin assembly, closure model and invariant-set diagnostics
//! * [`mes`]: extremum-seeking tuner and learning cost
//! * [`pipeline`]: configurable end-to-end experiments

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod linalg;
pub mod mes;
pub mod ode;
pub mod pipeline;
pub mod pod;
pub mod rom;
pub mod truth;

pub use error::{Result, RomError};
pub use ode::Trajectory;
pub use pod::PodBasis;
pub use rom::{ClosureConfig, QuadraticRom};
pub use truth::{SnapshotSet, TruthModel};
