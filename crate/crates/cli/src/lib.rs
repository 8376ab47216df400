//! Experiment files, greymap targets and CSV output for the Deep Uzawa solver.

pub mod commands;
pub mod config;
mod error;
pub mod gradcheck;
pub mod output;
pub mod pgm;

pub use config::{parse_config, parse_config_str, ExperimentConfig, ExperimentTag, OracleScheme};
pub use error::{CliError, Result};
pub use output::{emit_csv, read_csv};
pub use pgm::{load_pgm_target, ImageTarget};
