use thiserror::Error;

pub type Result<T> = std::result::Result<T, GaqqError>;

#[derive(Debug, Error)]
pub enum GaqqError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is not positive semi-definite: {0}")]
    NotPositiveSemiDefinite(String),

    /// Every grid point of a tuning run failed; one diagnostic line per pair.
    #[error("tuning failed for all {} grid points", .0.len())]
    TuningFailed(Vec<String>),

    #[error("benchmark failed: {0}")]
    BenchmarkFailed(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GaqqError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GaqqError::InvalidInput(msg.into())
    }

    /// True for failures rooted in the numerics (non-PD matrices, failed tuning).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            GaqqError::NotPositiveDefinite(_)
                | GaqqError::NotPositiveSemiDefinite(_)
                | GaqqError::TuningFailed(_)
                | GaqqError::BenchmarkFailed(_)
        )
    }
}
