//! Command-line front end: configuration, spectral estimates, single solves,
//! stabilization sweeps and a dense-oracle verification battery.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod verify;

pub use commands::{cmd_estimate, cmd_solve, cmd_sweep, LChoice};
pub use config::{ExperimentConfig, Mode};
pub use error::{CliError, CliResult};
pub use verify::cmd_verify;
