//! Finite graded models of metric Fréchet spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`graded`]: weights, the modulus `Φ`, standard and supremum metrics
//! * [`models`]: truncated sequences, band-limited periodic functions, curves
//! * [`operators`]: linear maps, r-bound estimation, Neumann inversion, distortion
//! * [`minkowski`]: gauges of supremum-metric balls and tame-grade estimation
//! * [`calculus`]: directional derivatives and b-differentiability diagnostics
//! * [`solver`]: certified fixed-point iteration and inverse-function solvers
//! * [`length`]: Gromov, metric and smooth curve lengths
//!
//! Batch evaluations go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and a plain loop otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod error;
pub mod graded;
pub mod length;
pub mod minkowski;
pub mod models;
pub mod operators;
pub mod par;
pub mod solver;

pub use error::{FrechetError, Result};
pub use graded::{
    comparability_check, geometric_weights, phi, piecewise_line_metric, standard_metric,
    sup_metric, Flavor, GradedMetricConfig, Modulus, SeminormLadder, WeightSequence,
};
pub use models::{GradedPoint, PeriodicFunction, TruncatedSequence};
pub use par::Execution;

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
