//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_width}x{expected_height}, found {found_width}x{found_height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        found_width: usize,
        found_height: usize,
    },

    #[error("pixel buffer length {found} does not match {width}x{height}")]
    BufferLength {
        width: usize,
        height: usize,
        found: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("parameter {name} = {value} must be {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("reference image has zero norm")]
    ZeroNormReference,

    /// The per-pixel exponential `e^(g - z)` left the representable range.
    /// This signals an iterate far below the observation; the caller should
    /// clamp the input or re-initialize.
    #[error("exponential overflow in data term{}", .iteration.map(|k| format!(" at outer iteration {k}")).unwrap_or_default())]
    DataTermOverflow { iteration: Option<usize> },

    #[error("empty lambda grid")]
    EmptyGrid,

    #[error("no sweep point produced a usable restoration")]
    SweepExhausted,

    #[error("malformed image header: {0}")]
    MalformedHeader(String),

    #[error("truncated pixel payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("unsupported PGM maxval {0} (must be 1..=65535)")]
    UnsupportedMaxval(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
