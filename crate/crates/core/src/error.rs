use thiserror::Error;

/// Errors produced while building inputs or propagating the system.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} outside pulse domain [0, {duration}]")]
    OutOfDomain { t: f64, duration: f64 },

    /// Population leaked into the two highest Fock levels; `n_max` is too small.
    #[error("truncation overflow at t = {t}: tail population {tail:e} (n_max = {n_max})")]
    TruncationOverflow { t: f64, tail: f64, n_max: usize },

    #[error("integrator step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("insufficient samples in measurement window [{start}, {end}]: {found} < {required}")]
    InsufficientSamples {
        start: f64,
        end: f64,
        found: usize,
        required: usize,
    },

    #[error("singular design matrix in quadratic fit")]
    SingularDesign,

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Time at which a numerical failure happened, if this is one.
    pub fn failure_time(&self) -> Option<f64> {
        match self {
            Error::TruncationOverflow { t, .. } | Error::StepFailure { t, .. } => Some(*t),
            _ => None,
        }
    }

    pub fn is_numerical(&self) -> bool {
        self.failure_time().is_some()
    }
}

pub type Result<T> = std::result::Result<T, Error>;
