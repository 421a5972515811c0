//! Finite-dimensional state algebra: pure states, projective measurements,
//! unitaries, two-party composition and the Born/projection primitives.

mod bipartite;
mod distribution;
pub mod linalg;
mod pvm;
pub mod qubit;
pub mod random;
mod state;
mod unitary;

pub use bipartite::{measure_subsystem, reduced_density, tensor, BipartiteState, DensityMatrix, Side, SubsystemOutcome};
pub use distribution::{Distribution, Entry};
pub use linalg::{Matrix, C64};
pub use pvm::{axis_pvm, born_distribution, collapse, Outcome, ProjectiveMeasurement};
pub use state::PureState;
pub use unitary::{evolve, UnitaryOp};

/// Tolerance for every analytic comparison (norms, projector identities, probabilities).
pub const EPS_NORM: f64 = 1e-10;

/// Outcome weights at or below this are treated as exactly zero.
pub const EPS_PROB: f64 = 1e-12;

/// Input vectors whose norm is off by less than this are silently renormalized.
pub const RENORMALIZE_LIMIT: f64 = 1e-6;
