use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("site index {site} out of range for register with {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension {dim} exceeds the dense limit {limit}")]
    OverLimit { dim: usize, limit: usize },

    #[error("matrix is not {0}")]
    NotValid(&'static str),

    #[error("integration diverged: {0}")]
    Diverged(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("parse error: {0}")]
    Parse(String),
}
