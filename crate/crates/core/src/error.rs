use thiserror::Error;

/// Errors raised by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: expected {expected} keypoints, found {found}")]
    SchemaMismatch { expected: usize, found: usize },

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate training set: {0}")]
    DegenerateForest(String),

    #[error("stratification failed: class {class} has {count} samples, need at least {folds}")]
    Stratification { class: usize, count: usize, folds: usize },

    #[error("out of order frame {frame} after {last}")]
    OutOfOrder { frame: i64, last: i64 },

    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("unknown feature name `{0}`")]
    UnknownFeature(String),

    #[error("feature index {index} out of range (dimension {dim})")]
    FeatureIndex { index: usize, dim: usize },

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("empty class: {0}")]
    EmptyClass(String),

    #[error("missing event frame for sequence `{0}`")]
    MissingEvent(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by numerically degenerate data rather
    /// than malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateFrame(_) | Error::DegenerateForest(_) | Error::NotPositiveDefinite
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
