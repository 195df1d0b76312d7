//! Configuration, result files and subcommand execution.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{execute, Command, Outcome};
pub use config::{ExperimentConfig, ModelConfig, OutputFormat, RunConfig, ScanConfig};
