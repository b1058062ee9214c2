#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulation of path-dependent SDEs with Hölder or integrability-class
//! drifts: Euler-Maruyama type schemes on segment processes, Monte Carlo
//! weak-error measurement with common random numbers, discrete Girsanov
//! weights and diagnostics for the auxiliary moment bounds.

pub mod diagnostics;
pub mod error;
pub mod girsanov;
pub mod models;
pub mod montecarlo;
pub mod rng;
pub mod schemes;
pub mod segment;

pub use error::{Error, Result};
