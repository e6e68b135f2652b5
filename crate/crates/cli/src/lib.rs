//! Command-line front end: simulate data, train a model, estimate the
//! average treatment effect and score estimates against known truth.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{cmd_estimate, cmd_evaluate, cmd_simulate, cmd_train};
pub use config::RunConfig;
pub use error::CliError;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "STONET_THREADS";

/// `--threads` wins; the environment is consulted only without it.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>, CliError> {
    if let Some(t) = flag {
        return Ok(Some(t));
    }
    match env.map(str::trim).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}=`{s}` is not a thread count"))),
    }
}
