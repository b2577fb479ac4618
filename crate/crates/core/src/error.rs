use thiserror::Error;

pub type Result<T> = std::result::Result<T, HtcpError>;

#[derive(Debug, Error)]
pub enum HtcpError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("order mismatch: expected {expected}, found {found}")]
    OrderMismatch { expected: usize, found: usize },

    #[error("invalid tensor shape: {0}")]
    InvalidShape(String),

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("odd order {0} is not supported here")]
    OddOrder(usize),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("not a permutation matrix")]
    NotPermutation,

    #[error("R0 property refuted; degree undefined")]
    R0Refuted,

    #[error("no regular value found after {0} attempts")]
    DegenerateRegularValue(usize),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(HtcpError::DimensionMismatch { expected, found });
    }
    Ok(())
}
