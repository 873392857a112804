use thiserror::Error;

#[derive(Debug, Error)]
pub enum HcdError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dictionary column {column} has norm {norm}, expected 1")]
    NotNormalized { column: usize, norm: f64 },
    #[error("dictionary column {0} is identically zero")]
    ZeroColumn(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("oracle budget exceeded: K = {k}, max_support = {max_support} (need K <= 20 or max_support <= 4)")]
    BudgetExceeded { k: usize, max_support: usize },
    #[error("restricted least-squares system is singular on support {0:?}")]
    Singular(Vec<usize>),
    #[error("patch size {patch} exceeds image dimensions {width}x{height}")]
    PatchTooLarge {
        patch: usize,
        width: usize,
        height: usize,
    },
    #[error("malformed PGM: {0}")]
    Pgm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HcdError>;
