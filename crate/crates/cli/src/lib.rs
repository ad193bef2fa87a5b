//! Command-line front end: forward simulation, inverse series reconstruction,
//! convergence analysis and the built-in oracle suites.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod selftest;

pub use config::{Model, ModelKind, RunConfig};
pub use error::{CliError, CliResult};
