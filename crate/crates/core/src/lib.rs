//! Chebyshev–Lagrange learnable activations and the machinery around them:
//! a small reverse-mode autodiff engine, residual MLPs, synthetic regression
//! datasets, an SGD training loop and the benchmark harness.

pub mod activations;
pub mod autodiff;
pub mod bench;
pub mod cheby;
pub mod data;
pub mod error;
pub mod models;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
