//! Simulation of tunneling escape from the tilted washboard potential of a
//! current-biased Josephson junction.
//!
//! The one-dimensional Schrödinger equation is integrated with a
//! Crank–Nicolson scheme; the open boundary on the escape side is emulated by
//! a smooth imaginary absorbing layer. On top of that the crate extracts
//! decay rates, the relaxation knee that follows a null measurement, WKB
//! cross-checks and switching-current distributions.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod absorber;
pub mod analysis;
pub mod error;
pub mod experiment;
pub mod potentials;
pub mod propagator;
pub mod state;

pub use error::{Error, Result};
