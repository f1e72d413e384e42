//! Optimization over the Pareto front of bi-objective optimal control
//! problems.
//!
//! Problems are scalarized with the weighted Chebyshev (goal attainment)
//! method, transcribed by Euler or trapezoidal collocation, solved with a
//! built-in augmented Lagrangian method, and a master objective is then
//! minimized over the front by bisection on the weight.

pub mod cli;
pub mod error;
pub mod front;
pub mod linalg;
pub mod nlp;
pub mod problem;
pub mod problems;
pub mod scalarize;
pub mod transcription;
pub mod verify;

pub use error::{Error, Result};
