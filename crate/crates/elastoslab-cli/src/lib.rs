//! Configuration, batch runs, sweep reports and the verification suite for
//! the elastoslab solver.

pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod run;
pub mod suite;
pub mod verify;

use std::fs;
use std::path::Path;

pub use config::{parse_config, ConfigError, RunConfig};
pub use error::{CliError, CliResult};

/// Read and parse a configuration file; no path means all defaults.
pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => Ok(parse_config(&fs::read_to_string(p)?)?),
        None => Ok(RunConfig::default()),
    }
}
