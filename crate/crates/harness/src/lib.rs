//! Experiment driver for the low-rank integrators: config parsing, runs,
//! sweeps and timing studies, written out as CSV and JSON.

// negated comparisons are the NaN-rejecting form
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod stats;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
