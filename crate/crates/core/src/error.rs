use thiserror::Error;

/// Errors raised by the numerical and I/O layers of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A result overflowed the range the crate is willing to report.
    #[error("range error: {0}")]
    Range(String),

    /// Parameters violate the model invariants.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The ODE integrator could not make progress.
    #[error("integration failure: {0}")]
    Integration(String),

    /// A root could not be bracketed or located.
    #[error("root finding failure: {0}")]
    Root(String),

    /// Quadrature did not reach the requested tolerance.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// Malformed input data; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    /// True for failures caused by the caller's input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::InvalidParams(_)
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
