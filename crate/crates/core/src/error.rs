use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("raw Hermite polynomial of order {0} exceeds the overflow cap of {max}", max = crate::fock::HERMITE_POLY_MAX_ORDER)]
    HermiteOverflow(usize),
    #[error("matrix is not Hermitian: max |A - A^H| = {0:e}")]
    NotHermitian(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("invalid support set: {0}")]
    InvalidSupport(String),
    #[error("invalid interval: a = {a} must be below b = {b}")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid bin layout: {0}")]
    InvalidLayout(String),
    #[error("work dimension {work_dim} below truncation guard {required}")]
    TruncationGuard { work_dim: usize, required: usize },
    #[error("invalid measurement spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid measurement data: {0}")]
    InvalidData(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
