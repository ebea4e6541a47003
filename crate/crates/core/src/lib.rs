//! Collision-model battery charger driven by a Bayesian Maxwell demon.
//!
//! A stream of qubit ancillas collides with a system qubit, the system is
//! measured, and a demon decides from the outcome whether to pulse the
//! ancilla. A cold bath resets the system between collisions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod cli;
pub mod demon;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod qmath;
pub mod states;

pub use error::{Error, Result};
