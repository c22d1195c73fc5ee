//! Configuration, drivers and file formats for the command-line experiments.

pub mod commands;
pub mod config;
pub mod io;

pub use commands::{
    cmd_evolve, cmd_ground_state, cmd_instability, cmd_sweep, cmd_validate, CheckResult, CheckStatus, RunRecord,
    SweepRow, ValidationReport,
};
pub use config::{load_config, parse_config, ConfigError, ConfigErrorKind, ExperimentConfig};
