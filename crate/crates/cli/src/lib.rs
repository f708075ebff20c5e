//! Experiment drivers behind the `carryscan` command.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;

pub use config::ExperimentConfig;
pub use error::CliError;
