use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    /// The error norm vanishes, so efficiency indexes are undefined.
    #[error("approximation is exact: error norm is zero")]
    ExactApproximation,

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("incremental form not applicable: {0}")]
    NotIncremental(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
