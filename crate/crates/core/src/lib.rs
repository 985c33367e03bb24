//! Ising models with spectral-norm-bounded interaction matrices mix fast under
//! Gibbs sampling. This crate projects arbitrary Ising parameters onto such a
//! fast-mixing set under several divergences and estimates marginals by sampling
//! the projected model.
//!
//! The pieces:
//!
//! - [`model`] — Ising model representation, random instance generators,
//!   dependency/mixing-time bounds, the canonical feature layout.
//! - [`exact`] — ground-truth inference: brute-force enumeration for small
//!   models, variable elimination for bounded-width graphs, exact KL.
//! - [`projection`] — Euclidean projection onto
//!   `{B : || |B| ||₂ ≤ c, support(B) ⊆ graph}` via singular value
//!   thresholding and a Lagrangian dual solved with a bound-constrained
//!   limited-memory quasi-Newton method.
//! - [`sampling`] — seeded Gibbs chains, sample pools, marginal estimation.
//! - [`divergence`] — the four projection procedures (Euclidean, inclusive KL,
//!   piecewise KL, reversed KL with stochastic gradients) sharing one
//!   projected-gradient driver.
//! - [`baselines`] — naive mean-field and loopy belief propagation.
//! - [`harness`] — the end-to-end experiment driver and its CSV/timing outputs.
//! - [`io`] — the plain-text model format and marginal CSV files.

pub mod baselines;
pub mod divergence;
pub mod exact;
pub mod harness;
pub mod io;
mod lbfgsb;
pub mod model;
pub mod projection;
pub mod rng;
pub mod sampling;

pub use model::{GraphMask, Interaction, IsingModel, SpinConfig};

use nalgebra::DMatrix;
use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("enumeration refused: {n} nodes exceeds the {limit}-node cost guard")]
    TooManyNodes { n: usize, limit: usize },

    #[error("elimination refused: induced width {width} exceeds the {limit} guard")]
    WidthTooLarge { width: usize, limit: usize },

    #[error(
        "structured projection did not converge: projected gradient norm {grad_norm:.3e} \
         after {iterations} iterations (off-support residual {support_residual:.3e})"
    )]
    ProjectionDidNotConverge {
        iterations: usize,
        grad_norm: f64,
        support_residual: f64,
        /// Best feasible iterate found so far.
        best: Box<DMatrix<f64>>,
    },

    #[error("subgraph kind {kind} needs a grid topology, but none was detected")]
    NotAGrid { kind: &'static str },

    #[error("subgraph coverage cap of {cap} reached; uncovered edges: {uncovered:?}")]
    CoverageCapExceeded {
        cap: usize,
        uncovered: Vec<(usize, usize)>,
    },

    #[error("empty sample pool")]
    EmptyPool,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
