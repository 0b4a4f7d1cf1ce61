use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("coarse layout with {coarse} cells per side is finer than the fine mesh ({fine} cells)")]
    CoarseFinerThanFine { coarse: usize, fine: usize },

    #[error("degenerate coarse layout: two coarse gridlines snap to fine gridline {line}")]
    DegenerateLayout { line: usize },

    #[error("subdomain {0} is empty")]
    EmptySubdomain(usize),

    #[error("matrix is numerically singular (pivot {pivot} of {dim})")]
    SingularMatrix { pivot: usize, dim: usize },

    #[error("matrix is not positive definite (failed at row {row})")]
    NotPositiveDefinite { row: usize },

    #[error("dimension {dim} exceeds the dense analysis cap of {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("Krylov breakdown at iteration {iteration} with relative residual {relres:e}")]
    Breakdown { iteration: usize, relres: f64 },

    #[error("unknown preset or name: {0}")]
    Unknown(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
