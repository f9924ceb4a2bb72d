use thiserror::Error;

/// Errors raised by the simulation and analysis operations.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A frequency or time value lies outside the supported range.
    #[error("out of range: {0}")]
    Range(String),

    /// A model evaluated to a non-finite or otherwise invalid value.
    #[error("model error: {0}")]
    Model(String),

    /// The requested statistic is undefined for the given data.
    #[error("undefined result: {0}")]
    Undefined(String),

    /// A trace, spectrum or count file could not be decoded.
    #[error("malformed input at {location}: {message}")]
    Format { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
