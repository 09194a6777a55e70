//! Command-line front end: run configuration, the subcommands and the CSV
//! and JSON files they write.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
