use thiserror::Error;

use crate::dispersion::Mode;

#[derive(Debug, Error)]
pub enum Error {
    /// Non-finite or out-of-domain numeric input.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no {mode} root bracketed at {frequency_hz} Hz")]
    RootNotFound { mode: Mode, frequency_hz: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Infeasible frame or other structurally impossible configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("design error: {0}")]
    Design(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{field}: {message}")]
    Validation { field: String, message: String },

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} is not finite ({value})")))
    }
}
