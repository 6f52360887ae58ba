use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("factor index {index} out of range for {count} factors")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("malformed permutation {0:?}")]
    BadPermutation(Vec<usize>),

    #[error("matrix is not Hermitian (max |A - A^dagger| entry = {0:e})")]
    NotHermitian(f64),

    #[error("parameter out of range: {0}")]
    InvalidParameter(String),

    /// A mathematical precondition of the requested construction does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("operator side {side} exceeds the size cap {cap}")]
    SizeCapExceeded { side: usize, cap: usize },

    #[error("schema violation: {0}")]
    Schema(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

/// A value together with non-fatal warnings raised while computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

impl<T> Flagged<T> {
    pub fn clean(value: T) -> Self {
        Self { value, warnings: Vec::new() }
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}
