use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the interval an operation is defined on.
    #[error("{quantity} = {value} is outside the valid range [{min}, {max}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// A model or scenario section violates one of its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Two spectral objects were combined that do not live on the same grid.
    #[error("frequency grids do not match")]
    GridMismatch,

    /// A quantity that must be strictly positive (usually a norm) vanished.
    #[error("{0} is zero")]
    Zero(&'static str),

    #[error("malformed event stream at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("failed to read {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(quantity: &'static str, value: f64, min: f64, max: f64) -> Self {
        Error::Domain {
            quantity,
            value,
            min,
            max,
        }
    }
}
