//! Open-system harmonic oscillator with time-dependent frequency and friction:
//! Lindblad evolution in a truncated Fock basis, auxiliary Ermakov equations
//! and weak invariants.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod auxiliary;
pub mod error;
pub mod invariant;
pub mod lindblad;
pub mod linalg;
pub mod operators;
pub mod rk4;
pub mod scenario;
pub mod schedule;

pub use error::{Error, Result};
