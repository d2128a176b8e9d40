use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(
        "X^T X is singular (smallest eigenvalue {min_eigenvalue:e}); \
         fall back to a ridge-regularized pseudo-inverse via `ExtremizeOptions::ridge`"
    )]
    SingularGram { min_eigenvalue: f64 },

    #[error("threshold {threshold} is below the attainable empirical loss {attainable}")]
    ThresholdBelowAttainable { threshold: f64, attainable: f64 },

    #[error("linear program is {0}")]
    Lp(&'static str),

    #[error("{0} is not supported for this loss")]
    Unsupported(&'static str),

    #[error("start point is not a member of the set")]
    StartNotMember,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_prob_open(name: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{p} is not in (0, 1)"),
        })
    }
}

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{v} is not a positive finite number"),
        })
    }
}
