use thiserror::Error;

/// Errors raised across the field engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("degenerate pixel ({row}, {col}): zero variance across replicates")]
    DegeneratePixel { row: usize, col: usize },

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("likelihood evaluation failed: {0}")]
    Likelihood(String),

    #[error("format error at {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("hdf5: {0}")]
    Hdf5(#[from] hdf5::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
