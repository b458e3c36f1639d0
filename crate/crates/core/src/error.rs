use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what} needs at least {needed} elements, got {got}")]
    TooShort {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("skeleton has no mirror map")]
    MissingMirrorMap,
    #[error("numerical failure at diffusion step {step}: {what}")]
    Numerical { step: usize, what: &'static str },
    #[error("data has rank {achievable}, cannot fit {requested} latent dimensions")]
    RankDeficient { requested: usize, achievable: usize },
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("generator failed: {0}")]
    Generator(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn ensure_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}
