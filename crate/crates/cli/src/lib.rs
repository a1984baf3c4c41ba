//! Command-line front end: configuration, presets, artifact emission and the
//! acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod svg;
pub mod writer;

pub use error::{CliError, CliResult};
