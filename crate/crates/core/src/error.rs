use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge (residual estimate {residual:.3e})")]
    Quadrature { residual: f64 },

    #[error("cholesky factorization failed after jitter {jitter:e}; try a larger noise variance or jitter")]
    Cholesky { jitter: f64 },

    #[error("non-finite loss in component `{0}`")]
    NonFiniteLoss(&'static str),

    #[error("optimizer diverged at iteration {iteration}")]
    Diverged { iteration: usize, trace: Vec<f64> },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("property check failed: {0}")]
    Property(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-parsable category used by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) | Error::Unsupported(_) => "invalid-parameter",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NonFinite(_) => "non-finite-input",
            Error::Quadrature { .. } => "quadrature",
            Error::Cholesky { .. } => "cholesky",
            Error::NonFiniteLoss(_) | Error::Diverged { .. } => "divergence",
            Error::Sampling(_) => "sampling",
            Error::Property(_) => "property",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
