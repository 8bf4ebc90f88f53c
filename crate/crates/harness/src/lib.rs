//! Command-line plumbing around `mdn_core`: checkpoint files, experiment
//! configuration, CSV metrics, image sets and the experiment drivers used
//! by the `mdn` binary and the acceptance suite.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod metrics;

pub use error::{HarnessError, Result};
