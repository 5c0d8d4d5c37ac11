use thiserror::Error;

/// Errors raised by model construction, solvers and simulators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {what} requires {required}, cap is {cap}")]
    Capacity {
        what: String,
        required: u128,
        cap: u128,
    },

    /// A computation reached a state that contradicts a proven property of the model.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn capacity(what: impl Into<String>, required: u128, cap: u128) -> Self {
        Error::Capacity {
            what: what.into(),
            required,
            cap,
        }
    }

    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
