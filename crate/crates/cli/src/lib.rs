//! Command-line front end, file formats and parallel execution for
//! `chorin-core` convergence studies.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod spectral;

pub use error::CliError;
