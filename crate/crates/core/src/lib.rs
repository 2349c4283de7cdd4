//! Finite-difference solvers for linear parabolic stochastic
//! integro-differential equations driven by Wiener and Poisson noise, with a
//! Monte Carlo harness for strong convergence studies.

pub mod benchmark;
pub mod error;
pub mod grid;
pub mod harness;
pub mod levy;
pub mod noise;
pub mod operators;
pub mod quadrature;
pub mod schemes;

pub use error::{Error, Result};
