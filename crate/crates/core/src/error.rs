use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("state or weights not normalized: |norm - 1| = {deviation:e}")]
    Normalization { deviation: f64 },

    #[error("negative weight {value:e} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("shape mismatch: expected dimension {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("eigensolver failed ({reason}); matrix seed {seed:?}")]
    Solver { seed: Option<u64>, reason: String },

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(
        "dense fourth-moment tensor at n = {n} exceeds the cap n <= {max}; use the sliced estimator"
    )]
    Capacity { n: usize, max: usize },

    #[error("degenerate tensor fit: pair moment estimate {0:e} is not positive")]
    DegenerateFit(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("failed to write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
