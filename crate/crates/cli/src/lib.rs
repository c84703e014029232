//! Command-line driver for the penalized barrier solver: TOML configuration,
//! subcommands, CSV reports and SVG figures.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod svg;

pub use config::{parse_config, RunConfig};
pub use error::CliError;
