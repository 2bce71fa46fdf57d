use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a geometric operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Not enough (or not varied enough) data to perform an operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed line in a text file.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A solver or training run produced a non-finite or degenerate result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
