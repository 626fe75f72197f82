//! Exact-in-the-limit Gaussian process classification with a probit link.
//!
//! Class posteriors and the marginal likelihood of a binary GP classifier are
//! ratios of zero-mean multivariate Gaussian orthant probabilities. This crate
//! evaluates those probabilities with a single sweep over the dimensions that
//! alternates conditional Gaussian draws, rejection of draws outside the
//! orthant, and bootstrap replenishment of the rejected particles.
//!
//! Module map:
//!
//! - [`kernels`]: RBF and linear covariance construction.
//! - [`linalg`]: recursive conditional-Gaussian moments and the block-inverse
//!   identity linking the two orthant covariances.
//! - [`orthant`]: the sequential rejection/bootstrap estimator.
//! - [`gpc`]: fitting, prediction and hyperparameter grid search.
//! - [`oracles`]: one-dimensional quadrature reductions and brute-force checks.
//! - [`experiments`]: synthetic benchmark drivers and CSV tables.
//! - [`cli`]: the `gpc-mc` command line.

// `!(x > bound)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod gpc;
pub mod kernels;
pub mod linalg;
pub mod normal;
pub mod oracles;
pub mod orthant;
pub mod rng;

pub use error::{Error, Result};
