use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid block size {k} for dimension {dim}")]
    InvalidBlockSize { k: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("non-finite value at coordinate {index}")]
    NonFinite { index: usize },

    #[error("constraint violated: approximation {c} must exceed 2*sqrt(k) = {tau}")]
    ConstraintViolated { c: f64, tau: f64 },

    #[error("infeasible plan: c = {c} is too small, minimal viable c is {min_c} (leaf dimension k2 = {k2})")]
    Infeasible { c: f64, min_c: f64, k2: usize },

    #[error("budget exceeded: {what} needs {required}, limit is {limit}")]
    Budget { what: &'static str, required: u128, limit: u128 },

    #[error("hash digit {value} does not fit in 32 bits")]
    HashOverflow { value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
