use thiserror::Error;

/// Errors produced by the cone, metric, cocycle and estimator layers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero vector not allowed here")]
    ZeroVector,

    #[error("vectors are not comparable in the cone order")]
    NotComparable,

    #[error("order-ratio bound absent ({side})")]
    AbsentBound { side: &'static str },

    #[error("matrix has a nonpositive entry at ({row},{col})")]
    NonPositiveEntry { row: usize, col: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("focusing violated by the sample at path index {index}")]
    FocusingViolation { index: i64 },

    #[error("principal pairing degenerate (|<w,w*>| <= {tolerance})")]
    DegeneratePairing { tolerance: f64 },

    #[error("entrywise domination violated at path index {index}")]
    DominationViolated { index: i64 },
}

pub type Result<T> = std::result::Result<T, CoreError>;
