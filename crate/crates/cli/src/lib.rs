//! Command-line driver for the torus vortex solver: configuration files,
//! the `solve`, `sweep` and `verify` commands and their artifacts.

pub mod commands;
pub mod config;

pub use commands::{cmd_solve, cmd_sweep, cmd_verify, init_threads, Outcome};
pub use config::{ConfigError, Run, RunConfig};
