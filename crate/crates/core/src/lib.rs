//! Dynamic prediction of overall schedule delay for agile epics.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every numerical
//! piece of the pipeline:
//!
//! - [`data`]: the unified milestone timeline, BRE and delayed story points,
//!   dataset cleaning.
//! - [`synth`]: a seeded generator of synthetic backlogs with four planted
//!   delay patterns.
//! - [`dtw`] and [`cluster`]: delay-profile normalization, DTW distance,
//!   average-linkage clustering, elbow selection, partial-series
//!   classification and cluster characterization.
//! - [`bayes`]: zero-inflated Beta regression, its analytic-gradient log
//!   posterior, an HMC sampler, convergence diagnostics and predictive
//!   distributions.
//! - [`modes`]: global, global-iterative and dynamic prediction modes.
//! - [`eval`]: time-ordered cross-validation and accuracy statistics.
//!
//! File formats, the CLI and thread pools live in the `delaydyn` crate.

#![no_std]

extern crate alloc;

pub mod bayes;
pub mod cluster;
pub mod data;
pub mod dtw;
pub mod error;
pub mod eval;
pub mod exec;
pub mod math;
pub mod modes;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
