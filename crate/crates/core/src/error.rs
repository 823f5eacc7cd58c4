use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Variants are grouped by what the caller can do about them; see
/// [`Error::category`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver instability at t = {time}: max |dL| per step = {max_delta:.3e}")]
    Instability { time: f64, max_delta: f64 },

    #[error("monotonicity repair of {violation:.3e} at t = {time} exceeds tolerance")]
    MonotonicityViolation { time: f64, violation: f64 },

    #[error("probe x = {x} at t = {t} lies outside the grid [{x_min}, {x_max}]")]
    DomainOverflow { x: f64, t: f64, x_min: f64, x_max: f64 },

    #[error("level ln(1/2) is not bracketed by the field")]
    LevelNotBracketed,

    #[error("particle cap of {cap} exceeded (horizon t = {t})")]
    ParticleCap { cap: usize, t: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,
}

/// Coarse classification used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Invalid,
    Instability,
    ParticleCap,
    DomainOverflow,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Instability { .. } | Error::MonotonicityViolation { .. } => {
                ErrorCategory::Instability
            }
            Error::ParticleCap { .. } => ErrorCategory::ParticleCap,
            Error::DomainOverflow { .. } => ErrorCategory::DomainOverflow,
            Error::InvalidArgument(_)
            | Error::LevelNotBracketed
            | Error::InsufficientSamples(_)
            | Error::RankDeficient => ErrorCategory::Invalid,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
