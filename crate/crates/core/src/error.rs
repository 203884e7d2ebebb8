use thiserror::Error;

use crate::trace::Trace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid box: lower bound {lower} exceeds upper bound {upper} at index {index}")]
    InvalidBox {
        index: usize,
        lower: f64,
        upper: f64,
    },

    #[error("multiplier z[{index}] = {value} is negative")]
    NegativeMultiplier { index: usize, value: f64 },

    #[error(
        "power iteration did not converge after {iterations} iterations (best estimate {estimate})"
    )]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("analytic step size needs {0}; use backtracking step mode instead")]
    MissingConstants(String),

    #[error("problem has no block partition")]
    MissingPartition,

    #[error("invalid block partition: {0}")]
    InvalidPartition(String),

    #[error("the nonsmooth term is not separable over the block partition")]
    NonSeparable,

    #[error("backtracking exceeded {0} step-size increases; oracle values may be non-finite")]
    BacktrackLimit(usize),

    #[error("incompatible method and problem: {0}")]
    Incompatible(String),

    #[error("unknown {what}: {name}")]
    Unknown { what: &'static str, name: String },

    #[error("solver diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: String,
        trace: Box<Trace>,
    },

    #[error("not enough samples for rate fit: {0}")]
    InsufficientSamples(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
