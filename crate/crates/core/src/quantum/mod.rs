//! N-level density-matrix engine.

mod density;
mod evolve;
mod level;
mod solver;

pub use density::{DensityMatrix, HERMITIAN_TOL, PSD_TOL, TRACE_TOL};
pub use evolve::{evolve, evolve_driven, rk4_propagator, DrivenGenerator, TRACE_DRIFT_LIMIT};
pub use level::{Coupling, Decay, DecayRates, LevelSystem, MAX_LEVELS};
pub use solver::{build_hamiltonian, liouvillian, steady_state};
