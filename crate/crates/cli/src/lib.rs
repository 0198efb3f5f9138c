//! Batch runner: reads a TOML run configuration, evaluates the requested
//! tasks with `finsler-core` and writes a JSON report.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
pub use report::Report;
pub use run::{run, run_file, Overrides};
