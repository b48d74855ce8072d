use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration rejected:\n{0}")]
    ConfigRejected(String),

    #[error("bifunction {index} violates the {requirement} requirement: {detail}")]
    ContractViolation {
        index: usize,
        requirement: &'static str,
        detail: String,
    },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("outer-approximation intersection is empty (iteration {iteration}): {detail}")]
    EmptyIntersection { iteration: usize, detail: String },

    #[error("problem file: {0}")]
    ProblemFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
