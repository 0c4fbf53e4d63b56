//! Cross-fitting for correlated data.
//!
//! The crate provides:
//!
//! - a data model for observations and their dependence structure ([`dependence`], [`data`]),
//! - sample-splitting schemes that either ignore the dependence ("as-independent")
//!   or account for it (two-way blocks, leave-neighbors-out, neighbors-left-out) ([`splitters`]),
//! - in-repo nuisance learners behind one fit/predict interface ([`learners`]),
//! - the cross-fitted doubly-robust one-step ATE estimator and dependence-aware
//!   variance estimators ([`estimators`]),
//! - generators for clustered, network and m-dependent time-series data with
//!   closed-form or quadrature oracles ([`dgp`]),
//! - empirical-process diagnostics ([`diagnostics`]),
//! - a deterministic, parallel Monte Carlo harness with CSV and SVG outputs ([`harness`]).

pub mod data;
pub mod dependence;
pub mod dgp;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod learners;
pub mod matrix;
pub mod parallel;
pub mod rng;
pub mod splitters;

pub use error::{Error, Result};
