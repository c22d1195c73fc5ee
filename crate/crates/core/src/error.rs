use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("field length {found} does not match grid size {expected}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("field contains non-finite values")]
    Diverged,

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error(transparent)]
    Config(#[from] crate::experiment::config::ConfigError),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Grid(_) | Error::Configuration(_) => 2,
            Error::Diverged | Error::NonConvergence { .. } => 3,
            Error::Regime(_) | Error::Precondition(_) => 4,
            Error::Validation(_) => 5,
            Error::SizeMismatch { .. } | Error::Io(_) | Error::Json(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
