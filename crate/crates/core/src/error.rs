use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rank-deficient input: {0}")]
    Degenerate(&'static str),
    #[error("non-finite value during optimization at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("unknown sample id {0}")]
    UnknownSample(u64),
    #[error("label vocabulary violation: {0}")]
    Vocabulary(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}
