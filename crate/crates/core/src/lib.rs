//! Simulation and optimal control of an anharmonic qudit whose environment
//! contains strongly coupled two-level defects (TLS) and a Markovian bath.
//!
//! The crate builds the joint qudit ⊗ TLS operators ([`model`]), propagates
//! the Lindblad master equation and extracts reduced qudit channels
//! ([`lindblad`]), optimizes piecewise-constant level-shift pulses toward
//! diagonal unitaries ([`grape`]), and provides the supporting analyses:
//! Cartan factorization of unitaries into `SO(N)·diag·SO(N)` ([`cartan`]),
//! dynamic Lie-algebra rank tests ([`liealg`]) and the channel-determinant
//! non-Markovianity diagnostic ([`nonmarkov`]). [`harness`] wires these into
//! reproducible, config-driven experiments.

pub mod cartan;
pub mod error;
pub mod grape;
pub mod harness;
pub mod liealg;
pub mod lindblad;
pub mod linalg;
pub mod matrix_io;
pub mod model;
pub mod nonmarkov;
pub mod presets;

pub use cartan::{is_special_orthogonal, kak_decompose, KakDecomposition};
pub use error::{Error, Result};
pub use grape::{
    apply_constraints, gradient, objective, optimize, random_diagonal_target, OptimizationConfig,
    OptimizationResult, OptimizerKind, RampSpec,
};
pub use lindblad::{
    average_fidelity, liouvillian, partial_trace_env, propagate_slice, propagator,
    reduced_channel, Channel, DensityMatrix, PiecewiseControl, Superoperator,
};
pub use harness::{FileConfig, Provenance};
pub use liealg::{diagonal_reachability, ideal_closure, lie_closure, LieClosure};
pub use linalg::{CMatrix, RMatrix, C64};
pub use model::{build_operators, FrequencyConvention, validate_excitation_conservation, ModelSpec, OperatorSet, QuditSpec, TlsSpec};
pub use nonmarkov::{determinant_trace, is_markovian, DeterminantTrace};
