use crate::graph::VariableKey;
use thiserror::Error;

/// Errors raised by factor-graph construction, elimination and solving.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown variable {0}")]
    UnknownVariable(VariableKey),
    #[error("system is indeterminate at variable {0}")]
    Indeterminate(VariableKey),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bad ordering: {0}")]
    BadOrdering(String),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("unknown factor id {0}")]
    UnknownFactor(usize),
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid robot model: {0}")]
    Model(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid signed distance field: {0}")]
    Sdf(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
