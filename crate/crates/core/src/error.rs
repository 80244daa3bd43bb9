//! Error type shared by the core modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid lattice geometry: {0}")]
    Geometry(String),

    #[error("basis dimension {dim} exceeds the budget {budget}")]
    DimensionOverflow { dim: u128, budget: u128 },

    #[error("operator is not diagonal in the product basis: {0}")]
    NotDiagonal(String),

    #[error("unknown boundary label {0}")]
    UnknownLabel(usize),

    #[error("non-matching contour configuration: {0}")]
    NonMatching(String),

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("unsupported region: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
