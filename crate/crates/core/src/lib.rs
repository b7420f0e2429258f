//! Kriging predictor aggregation.
//!
//! This crate implements exact Gaussian-process conditioning on a design of
//! observation points, per-group Kriging submodels over a partition of that
//! design, and two families of aggregation rules on top of them:
//!
//! * variance-based rules (PoE, gPoE, BCM, rBCM), which combine submodel
//!   means using only the per-group conditional variances;
//! * the nested rule, the best linear combination of the submodel
//!   predictors, which accounts for their cross-covariances.
//!
//! Around these it provides the aggregated process (a modified Gaussian
//! process whose exact conditional law reproduces the nested prediction,
//! with prior covariance `k_A` and posterior covariance `c_A`), closed-form
//! error diagnostics comparing aggregated and full models, and an experiment
//! harness that evaluates consistency and non-consistency of the aggregation
//! rules with exact mean-square errors — no Monte Carlo anywhere on the
//! prediction side.
//!
//! Batch operations are data-parallel via rayon under the `parallel`
//! feature (enabled by default); every batch entry point has a sequential
//! `_seq` twin used by the benchmark suite.

pub mod aggregators;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod gp;
pub mod kernels;
pub mod nested;
pub mod process;
pub mod submodels;

mod linalg;
mod parallel;

pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelSpec, Lengthscale, PointSet};
