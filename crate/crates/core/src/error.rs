use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or topology do not fit together.
    #[error("structure: {0}")]
    Structure(String),

    /// A hyperparameter or configuration value is out of range.
    #[error("parameter: {0}")]
    Parameter(String),

    /// A non-finite value appeared during evaluation.
    #[error("numeric: {context}")]
    Numeric { context: String },

    /// Data handed to an operation is unusable (empty, mismatched, missing).
    #[error("input: {0}")]
    Input(String),
}

impl Error {
    pub(crate) fn numeric(context: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
