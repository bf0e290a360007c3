use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameters that violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operation needs an input the caller did not provide.
    #[error("missing input: {0}")]
    MissingInput(String),

    /// The computation ran into a numerical limit (scan cap, overflow,
    /// non-finite sample).
    #[error("numerical diagnostic: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn missing(msg: impl Into<String>) -> Self {
        Error::MissingInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
