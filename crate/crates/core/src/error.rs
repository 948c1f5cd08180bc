use thiserror::Error;

/// Errors produced by the optimizers and their supporting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument was outside the domain of the operation.
    #[error("invalid {field}: {reason}")]
    Domain { field: &'static str, reason: String },

    /// A root search could not bracket a sign change.
    #[error("bracket expansion failed on [{lo}, {hi}] after {iterations} steps")]
    Bracket { lo: f64, hi: f64, iterations: usize },

    /// A numerical routine produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Configuration text could not be parsed or validated.
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
}

impl Error {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
