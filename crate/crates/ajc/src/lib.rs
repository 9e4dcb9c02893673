//! Command-line companion to `ajc-core`: JSON configs, MatrixMarket IO,
//! CSV outputs and thread-parallel drivers.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod mtx;
pub mod parallel;

pub use config::{Preset, RunConfig};
pub use error::{CliError, Result};
