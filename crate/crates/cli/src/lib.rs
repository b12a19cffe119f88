//! Config-driven experiment runner: parses an experiment file, runs it on a
//! worker pool and writes one CSV per report plus a `manifest`.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime invariant violation,
//! 3 I/O error.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use run::{run_config_file, run_experiment, RunError, RunOptions, RunSummary};
