//! Library side of the `regnewt` command-line harness: configuration
//! parsing, command drivers, CSV emission/re-validation and SVG plotting.
//! The binary in `main.rs` is a thin argument-parsing wrapper, so everything
//! here is directly testable.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod svg;

pub use commands::{build_experiment, cmd_rate_study, cmd_run, cmd_verify, CliOptions};
pub use config::{load_config, ExperimentConfig};
