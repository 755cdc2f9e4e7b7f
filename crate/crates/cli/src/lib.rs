//! Command-line front end: configuration loading and subcommand dispatch.

pub mod commands;
pub mod config;

pub use commands::{dispatch, field_to_csv, CliError, Command, Outcome};
pub use config::{load_config, ConfigError, RunConfig};
