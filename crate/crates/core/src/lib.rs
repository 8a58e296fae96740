//! Simulation of Rydberg atomic receivers: from the atomic level structure and
//! Lindblad dynamics, through EIT optical readout, to demodulation and
//! link-level experiments.

// `!(x > 0.0)` is how validation rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eit;
pub mod error;
pub mod experiments;
pub mod mimo;
pub mod quantum;
pub mod registry;
pub mod sensitivity;
pub mod stats;
pub mod transduction;

pub use error::{Error, Result};
pub use quantum::{DensityMatrix, LevelSystem};
pub use registry::{PhysicalConstants, RydbergState, StateRegistry, Transition};
