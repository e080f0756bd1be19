//! Estimation of polynomial functions of an unknown unitary `g ∈ U(d)` from
//! controlled-`g` queries only.
//!
//! The crate simulates the generalized Hadamard test exactly, builds
//! SVD-sampled unbiased estimators for polynomial functions of `g`, and
//! computes the quantities that govern their query cost: the degree profile
//! `Rep_ε(f)`, the Haar-averaged bias, and Hoeffding shot counts.

pub mod circuit;
pub mod cli;
pub mod embed;
pub mod error;
pub mod estimator;
pub mod fourier;
pub mod functions;
pub mod haar;
pub mod linalg;
pub mod repr;
pub mod stats;

pub use error::{Error, Result};
