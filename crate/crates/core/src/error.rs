//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid interval: lo {lo} > hi {hi}")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("negative residual {value} at pixel {index}")]
    NegativeResidual { index: usize, value: f64 },

    #[error("weight {value} at pixel {index} outside (0, 1]")]
    InvalidWeight { index: usize, value: f64 },

    #[error("operation only defined in {required} mode")]
    UnsupportedMode { required: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("solver diverged at iteration {iter}: non-finite values")]
    Divergence { iter: usize },

    #[error("image too small: {width}x{height}, need at least {min} pixels on each side")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("bad magic: expected {expected:?}, got {got:?}")]
    BadMagic { expected: [u8; 4], got: [u8; 4] },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
}
