use thiserror::Error;

/// Failure categories surfaced by every fallible operation.
///
/// The CLI maps these one-to-one onto exit codes: input and validation
/// problems exit with 2, capability problems (budgets, unmet
/// preconditions) with 3.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("capability error: {0}")]
    Capability(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
