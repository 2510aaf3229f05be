//! Experiment driver behind the `gancmp` binary: dataset checks, training
//! from JSON configs, evaluation reports, comparison tables, ROC plots and
//! image sampling.

pub mod commands;
pub mod config;
pub mod datasets;
pub mod error;
pub mod manifest;
pub mod plot;
pub mod report;

pub use error::{CliError, CliResult};
