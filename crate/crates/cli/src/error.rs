use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("input: {0}")]
    Input(String),
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Input(_) => 5,
        }
    }

    /// Core errors raised while assembling a configuration are config errors.
    pub(crate) fn from_config(e: stonet_core::Error) -> Self {
        match e {
            stonet_core::Error::Numeric { context } => CliError::Numeric(context),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<stonet_core::Error> for CliError {
    fn from(e: stonet_core::Error) -> Self {
        match e {
            stonet_core::Error::Numeric { context } => CliError::Numeric(context),
            stonet_core::Error::Parameter(m) => CliError::Config(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
