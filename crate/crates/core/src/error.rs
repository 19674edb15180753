use thiserror::Error;

/// Errors produced by the model library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A y-level has no observations, so its threshold is not identified.
    #[error("y-level {level} has no observations; merge it with a neighbouring level before fitting")]
    EmptyLevel { level: usize },

    /// The numerical observed information could not be inverted.
    #[error("observed information matrix is singular at the reported optimum")]
    SingularInformation,

    #[error("transform gradient is numerically zero; standard error undefined")]
    DegenerateGradient,
}

pub type Result<T> = std::result::Result<T, Error>;
