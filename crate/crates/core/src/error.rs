use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quadrature did not converge at radius {radius}: {reason}")]
    Quadrature { radius: f64, reason: String },

    #[error("numerical failure at step {step}: {reason}")]
    Numerical { step: usize, reason: String },

    #[error("domain too small: {0}")]
    DomainSize(String),

    #[error("diagnostic failed: {0}")]
    Diagnostic(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
