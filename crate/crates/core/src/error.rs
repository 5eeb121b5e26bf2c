use thiserror::Error;

/// Errors raised anywhere in the sampler stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    /// The Haar-mixture reference is singular at its own center.
    #[error("reference singularity: squared Mahalanobis distance to the center is zero")]
    ReferenceSingularity,

    #[error("gradient vanishes at the evaluation point (|grad| = {norm:e})")]
    ZeroGradient { norm: f64 },

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("series too short: need at least {needed} values, found {found}")]
    TooShort { needed: usize, found: usize },

    #[error("dataset error at row {row}: {reason}")]
    Dataset { row: usize, reason: String },

    #[error("dataset column `{column}`: {reason}")]
    DatasetColumn { column: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("kernel `{kernel}` cannot target `{target}`: {reason}")]
    Incompatible {
        kernel: String,
        target: String,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures caused by floating-point trouble rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::ReferenceSingularity
                | Error::ZeroGradient { .. }
                | Error::ZeroVariance
                | Error::NotPositiveDefinite(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
