//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by tensor operations, solvers, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("conjugate gradient did not converge within {max_iters} iterations (residual {residual:.3e})")]
    CgDiverged { max_iters: usize, residual: f64 },

    #[error("file format error: {0}")]
    Format(String),

    #[error("checksum mismatch in {path}: stored {stored:#018x}, computed {computed:#018x}")]
    ChecksumMismatch {
        path: String,
        stored: u64,
        computed: u64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }

    pub fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }
}
