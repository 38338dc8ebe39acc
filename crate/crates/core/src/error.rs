use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("cannot fit {k} components to {n} points")]
    TooFewPoints { k: usize, n: usize },

    #[error("covariance is not positive definite")]
    SingularCovariance,

    #[error("component weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("detector has not been calibrated")]
    NotCalibrated,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("timestamps not strictly increasing at line {line} ({prev} then {t})")]
    NonMonotonicTime { line: usize, prev: f64, t: f64 },

    #[error("cable {0} has zero length")]
    ZeroLengthCable(usize),

    #[error("cable {index} has negative tension {value}")]
    NegativeTension { index: usize, value: f64 },

    #[error("config key `{key}`: {msg}")]
    ConfigKey { key: String, msg: String },

    #[error("ground-truth intervals must be sorted, non-overlapping and have start < end (interval {0})")]
    UnorderedTruth(usize),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data or configuration, as opposed
    /// to environment failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
