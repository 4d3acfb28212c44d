use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature or series failed to reach the requested accuracy.
    #[error("accuracy error: {message} (best estimate {estimate:e})")]
    Accuracy { message: String, estimate: f64 },

    /// Training produced a non-finite loss or gradient.
    #[error("numerical failure at epoch {epoch}: {message}")]
    Numerical { epoch: usize, message: String },

    /// A configuration or file could not be understood.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
