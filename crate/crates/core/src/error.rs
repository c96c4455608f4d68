use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// No endpoint slot qualifies for the requested draw.
    #[error("no endpoint slot of degree {degree} available")]
    SamplingExhausted { degree: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("degenerate chain: alpha + beta = 0")]
    DegenerateChain,

    /// Both endpoint degrees are unique, so a JDD-preserving chain never moves the edge.
    #[error("edge frozen: f(d_u) = f(d_v) = 1 under JDD preservation")]
    FrozenEdge,

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("no convergence after {iterations} iterations (estimate {estimate}, residual {residual:e})")]
    Convergence {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
