use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field} {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("config parse error on line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("layer shapes do not chain: layer {layer} expects {expected} inputs but previous layer yields {actual}")]
    ShapeChain {
        layer: usize,
        expected: usize,
        actual: usize,
    },

    #[error("agent index {agent} out of range for {n_agents} agents")]
    AgentOutOfRange { agent: usize, n_agents: usize },

    #[error("episode already finished after {0} steps")]
    EpisodeOver(usize),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
