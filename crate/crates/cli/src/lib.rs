//! Experiment harness for `mtp-amp`: configuration, Monte Carlo runs and
//! the outputs of the `mtp-amp` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod svg;

pub use commands::Context;
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
