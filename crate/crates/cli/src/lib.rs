//! Command-line front end: verification suites, decomposition runs, Hénon
//! resonance-zone builds and parameter sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod verify;

pub use config::{extract_config, MapSpec, OutputFormat, RunConfig, Subcommand};
pub use error::{CliError, Result};
