//! Error types shared across the library.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Tensor shapes incompatible with the requested operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// A NaN or infinity appeared where only finite values are allowed.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Caller violated an operation contract (empty input, bad argument, ...).
    #[error("contract error: {0}")]
    Contract(String),

    /// Malformed input file (CSV, model weights, config).
    #[error("format error: {0}")]
    Format(String),

    /// A cross-checked identity failed beyond tolerance.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
