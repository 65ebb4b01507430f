//! Command-line front end for spraylab: config parsing, subcommands and the
//! A1–A8 verification suites.

pub mod commands;
pub mod config;
pub mod error;
pub mod suites;

pub use config::RunConfig;
pub use error::{exit, CliError};
