//! Track reconstruction for a planar silicon tracker by minimising a
//! Denby-Peterson style energy over hit-pair segments.
//!
//! The energy is quadratic, so its minimum solves a sparse linear system.
//! That system is solved classically ([`classical`]), with a simulated HHL
//! circuit, or with the 1-bit HHL variant that only separates active from
//! inactive segments ([`hhl`]). Active segments then feed primary-vertex
//! finding ([`pv`]).

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod error;
pub mod hamiltonian;
pub mod hhl;
mod linalg;
pub mod pipeline;
pub mod pv;
pub mod quantum;
pub mod resources;
pub mod sparse;
pub mod toy_model;

pub use classical::{ActiveSet, EfficiencyReport, SolutionVector, SolveMethod, TrackCollection};
pub use error::{Error, Result};
pub use hamiltonian::{HamiltonianParams, LinearSystem, Segment, SegmentSet};
pub use hhl::{ClassifyRule, HhlConfig, QuantumResult, Variant};
pub use pipeline::{reconstruct, Method, ReconstructConfig, ReconstructionResult};
pub use toy_model::{DetectorConfig, Event, Hit};
