//! Command-line front end: dataset files, snapshots and the four commands.

pub mod commands;
pub mod dataset;
pub mod error;
pub mod snapshot;

pub use error::CliError;
