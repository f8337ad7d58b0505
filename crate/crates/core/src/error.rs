use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point is not on the boundary (off by {offset:e})")]
    NotOnBoundary { offset: f64 },

    #[error("point lies inside or on the body; the projection derivative needs an exterior point")]
    NotExterior,

    #[error("segment meets the body")]
    SegmentMeetsBody,

    #[error("operation not supported for {0}")]
    Unsupported(&'static str),

    #[error("superiorization matrix needs {requested} bytes, budget is {budget}")]
    CapacityExceeded { requested: u128, budget: u128 },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("increment is zero; angle undefined")]
    ZeroIncrement,

    #[error("perturbation direction has norm {norm}, must be at most 1")]
    UnboundedDirection { norm: f64 },

    #[error("no valid trials out of {total}")]
    NoValidTrials { total: usize },

    #[error("too few usable points for a scaling fit: {usable}")]
    TooFewPoints { usable: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
