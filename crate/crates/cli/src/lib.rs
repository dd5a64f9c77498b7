//! Command-line harness: strict configuration, training and evaluation
//! orchestration, verification and plot-data export.

pub mod commands;
pub mod config;
pub mod error;
pub mod metrics;

pub use config::RunConfig;
pub use error::CliError;
