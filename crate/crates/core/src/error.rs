use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid schedule configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid step parameters: {0}")]
    InvalidParams(String),
    #[error("invalid problem data: {0}")]
    InvalidData(String),
    #[error("problem does not provide {0}")]
    Unavailable(&'static str),
    #[error("recursion hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("non-finite value in iterate at t = {t}")]
    NonFinite { t: usize },
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(CoreError::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
