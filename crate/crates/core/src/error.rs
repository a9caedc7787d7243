use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the failure categories surfaced by the CLI exit codes:
/// configuration/usage problems, data/format problems, and numeric failures.
#[derive(Error, Debug)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix factorization, determinant or solve failed.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A scalar root solve failed to produce a usable iterate.
    #[error("solver error: {0}")]
    Solver(String),

    /// Malformed or unusable input data.
    #[error("data error: {0}")]
    Data(String),

    /// Invalid configuration or arguments.
    #[error("config error: {0}")]
    Config(String),

    /// A Monte Carlo estimate could not be produced reliably.
    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }
}
