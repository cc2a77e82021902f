//! Core algorithms for synthesizing tabular inventory rows from sparse
//! observations and scoring synthetic tables against observed ones.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! command line and the benchmark harness live in the `invsynth` crate.
//!
//! The pipeline is:
//!
//! 1. [`schema`]: typed table model and validation.
//! 2. [`preprocess`]: imputation, outlier clamping and variance-stabilizing
//!    transforms, fitted once and replayed on new data.
//! 3. [`model`] and [`generate`]: a conditional model fitted to the table,
//!    sequential per-feature sampling with a temperature knob and a
//!    permutation-averaged plausibility score per candidate.
//! 4. [`select`]: plausibility thresholding and mixing with observations.
//! 5. [`baselines`]: independent-marginal Monte Carlo and SMOTE.
//! 6. [`metrics`]: per-feature fidelity metrics and dependence deltas.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod error;
pub mod generate;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod schema;
pub mod select;
pub mod stats;

pub use error::{Error, Result};
pub use schema::{Cell, FeatureKind, FeatureSchema, FeatureSpec, Inventory, Row};

/// Guard added to every denominator that may vanish.
pub const EPSILON: f64 = 1e-8;

/// Lower bound applied to every fitted kernel bandwidth.
pub const BANDWIDTH_FLOOR: f64 = 1e-8;
