use thiserror::Error;

/// Errors surfaced by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: String, found: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("heater calibration: {0}")]
    Calibration(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("term carries {0} photons, more than the 8 the chip model supports")]
    Capacity(usize),

    #[error("measurement settings: {0}")]
    Settings(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("distribution has no post-selected weight")]
    EmptyDistribution,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn dim(expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
