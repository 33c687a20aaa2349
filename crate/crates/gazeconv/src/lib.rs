//! IO, file formats and the command-line front end for `gazeconv-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod files;

pub use error::{CliError, Result};
