//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, GnboError>;

#[derive(Debug, Error)]
pub enum GnboError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Cholesky factorization failed even at the top of the jitter ladder.
    /// Signals a degenerate dataset (e.g. exactly duplicated rows with zero
    /// noise beyond repair).
    #[error("Cholesky factorization failed at max jitter {max_jitter:e}")]
    FactorizationFailed { max_jitter: f64 },

    #[error("gradient model fit failed for coordinate {dim}: {source}")]
    GradientFit {
        dim: usize,
        #[source]
        source: Box<GnboError>,
    },

    #[error("nonpositive gradient variance {value:e}")]
    NonpositiveVariance { value: f64 },

    #[error("degenerate variance: sigma = 0 has no log-EI")]
    DegenerateVariance,

    #[error("acquisition returned a non-finite value at {point:?}")]
    NonFiniteAcquisition { point: Vec<f64> },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("nonpositive hyperparameter {name} = {value}")]
    NonpositiveHyperparameter { name: &'static str, value: f64 },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GnboError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GnboError::Io { path: path.into(), source }
    }
}
