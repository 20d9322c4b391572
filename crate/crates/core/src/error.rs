use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("signal too short: {len} samples (need at least {min})")]
    SignalTooShort { len: usize, min: usize },

    #[error("warp leaves the support of the input signal at t = {t:.6} s (maps to {mapped:.6} s)")]
    WarpOutOfRange { t: f64, mapped: f64 },

    #[error("covariance matrix is not positive definite; regularize it before solving")]
    NotPositiveDefinite,

    #[error("quadrature did not converge: relative disagreement {disagreement:.3e}")]
    QuadratureNotConverged { disagreement: f64 },

    #[error("parameter is not identifiable at this point (zero Fisher information)")]
    NotIdentifiable,

    #[error("spectrum does not vanish at zero frequency; J_X diverges")]
    DivergentLowFrequencyIntegral,

    #[error("no valid rows left after unwarping column {column}")]
    NoValidRows { column: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
