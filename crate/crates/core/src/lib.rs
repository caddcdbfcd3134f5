//! Simulation of a trapped-ion qubit under a bichromatic spin-dependent
//! force: closed-form cat-state dynamics, a Lindblad integrator for
//! cross-checks, echo pulse sequences with optical phase drift, scan
//! reconstruction with shot noise, and parameter fitting.
//!
//! The physics layers are generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix the scalar for the common case.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod dynamics;
pub mod error;
pub mod fitter;
pub mod harness;
pub mod noise;
pub mod oracle;
pub mod pulse;
pub mod quantum;
pub mod scalar;

pub use error::{Error, Result};

/// Double-precision aliases.
pub type State = quantum::QuantumState<f64>;
pub type Force = dynamics::ForceParams<f64>;
pub type Trap = dynamics::TrapConfig<f64>;
pub type Sequence = pulse::PulseSequence<f64>;
pub type Integrator = oracle::IntegratorSpec<f64>;

/// Single-precision aliases.
pub type State32 = quantum::QuantumState<f32>;
pub type Force32 = dynamics::ForceParams<f32>;
pub type Trap32 = dynamics::TrapConfig<f32>;
pub type Sequence32 = pulse::PulseSequence<f32>;
pub type Integrator32 = oracle::IntegratorSpec<f32>;
