//! Finding (δ, ε)-stationary points of nonsmooth nonconvex Lipschitz
//! functions.
//!
//! The crate is organised bottom-up:
//!
//! * [`base`] — vectors, the function-class descriptor and seeded RNG streams;
//! * [`functions`] — directionally differentiable test objectives;
//! * [`oracles`] — deterministic, stochastic, sub-Gaussian and inexact oracles;
//! * [`solvers`] — INGD and its stochastic variants, plus inexact Nesterov AGD;
//! * [`certify`] — Goldstein certificates and min-norm-in-hull;
//! * [`adversary`] — resisting oracles and lower-bound witness functions;
//! * [`harness`] — seeded experiment configs, trial execution and reporting.

pub mod adversary;
pub mod base;
pub mod certify;
pub mod error;
pub mod functions;
pub mod harness;
pub mod oracles;
pub mod solvers;

pub use base::{norm, segment_sample, FunctionClassSpec, RngStream, Vector};
pub use error::{Error, Result};
