use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid sub-vector: {0}")]
    InvalidSubVector(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient data: need at least {needed} distinct points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("segment {0} has no next segment")]
    NoNextSegment(usize),

    #[error("objective arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("empty Pareto front")]
    EmptyFront,

    #[error("stale or unknown state handle `{0}`")]
    StaleState(String),

    #[error("evaluator i/o: {0}")]
    EvaluatorIo(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
