//! File formats, the parallel runner and the subcommands of the `gauge-cspi`
//! command-line tool.

pub mod commands;
pub mod config_file;
mod error;
pub mod manifest;
pub mod price_sheet;
pub mod runner;
pub mod tsv;

pub use error::CliError;
