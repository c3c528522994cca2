//! Reproducible Monte Carlo laboratory for the diagonal entries of large
//! sample precision matrices.
//!
//! The crate is split the way the computation flows:
//!
//! * [`randgen`] draws standardized i.i.d. data matrices from seeded,
//!   counter-based substreams.
//! * [`linalg`] holds the exact identities: Gram-Schmidt QR, complement
//!   projectors, residual quadratic forms and log-determinants.
//! * [`precision`] evaluates `(Σ̂⁻¹)_qq` along several algebraically
//!   equivalent routes (direct inverse, Cramer's rule, residual quadratic
//!   forms, the shared-projector pair formulas).
//! * [`clt`] standardizes the entries, computes the limiting and finite-n
//!   variances and runs the replicate engine.
//! * [`harness`] wires configuration, reports and the command line together.

pub mod clt;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod precision;
pub mod randgen;

pub use error::{Error, Result};
