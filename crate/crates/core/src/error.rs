//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by field construction, determinant evaluation, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Flat data length does not match `product(extents) * rank`.
    #[error("data length mismatch: expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// A NaN or infinite component was found during validation.
    #[error("non-finite value at linear index {index}")]
    NonFiniteValue { index: usize },

    /// Grid dimensions violate an invariant (extent < 2, bad spacing, rank).
    #[error("invalid grid dimensions: {0}")]
    InvalidDims(String),

    /// A grid point lies outside the grid.
    #[error("point ({0}, {1}, {2}) out of bounds for extents ({3}, {4}, {5})")]
    OutOfBounds(usize, usize, usize, usize, usize, usize),

    /// A determinant was requested at a point lacking a required neighbor.
    #[error("determinant undefined at boundary point ({0}, {1}, {2})")]
    BoundaryUndefined(usize, usize, usize),

    /// An operation received a field of the wrong rank.
    #[error("rank mismatch: expected {expected}, got {actual}")]
    RankMismatch { expected: usize, actual: usize },

    /// Mask extents do not match the field extents.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A synthetic field specification is invalid.
    #[error("invalid field spec: {0}")]
    InvalidSpec(String),

    /// A volume file uses a datatype outside the supported subset.
    #[error("unsupported datatype: {0}")]
    UnsupportedDatatype(String),

    /// A volume file header could not be parsed.
    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    /// An unparsable string was passed where a variant or pattern was expected.
    #[error("cannot parse {what}: {input:?}")]
    Parse { what: &'static str, input: String },

    /// Underlying I/O failure.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json failure: {0}")]
    Json(#[from] serde_json::Error),
}
