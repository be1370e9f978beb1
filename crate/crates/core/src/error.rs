use thiserror::Error;

/// Errors produced by curve evaluation, mass computation and the calculus
/// operators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value {value} lies outside the domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid curve specification: {0}")]
    InvalidCurve(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(
        "integral did not converge: gap {gap:e} above tolerance {tol:e} after {cells} cells \
         (lower {lower}, upper {upper})"
    )]
    NonConvergence {
        lower: f64,
        upper: f64,
        gap: f64,
        tol: f64,
        cells: usize,
    },

    #[error(
        "bracketing failed: R(alpha) - 1 has the same sign at alpha = {low} (R = {r_low}) \
         and alpha = {high} (R = {r_high})"
    )]
    Bracketing {
        low: f64,
        high: f64,
        r_low: f64,
        r_high: f64,
    },

    #[error("staircase segment {index} over [{start}, {end}] failed: {reason}")]
    Segment {
        index: usize,
        start: f64,
        end: f64,
        reason: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn check_domain(value: f64, lo: f64, hi: f64) -> Result<()> {
        if value.is_finite() && value >= lo && value <= hi {
            Ok(())
        } else {
            Err(Error::Domain { value, lo, hi })
        }
    }

    /// Short machine-readable tag, used in error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidCurve(_) => "invalid_curve",
            Error::Numeric(_) => "numeric",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Bracketing { .. } => "bracketing",
            Error::Segment { .. } => "segment",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
