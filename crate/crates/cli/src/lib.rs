//! Configuration, subcommands and artifacts for the `cclt` command line tool.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, RunConfig, Subcommand};
pub use run::{run, CliError, Invocation, Outcome};

use std::path::{Path, PathBuf};

/// Read and parse a config file; `None` gives the defaults.
pub fn load_config(path: Option<&Path>) -> Result<(RunConfig, PathBuf), CliError> {
    match path {
        None => Ok((RunConfig::default(), PathBuf::from("."))),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io { path: p.to_path_buf(), message: e.to_string() })?;
            let base = p.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            Ok((parse_config(&text)?, base))
        }
    }
}
