//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unbalanced brace at line {line}")]
    UnbalancedBrace { line: usize },

    #[error("lemma `{0}` not found")]
    LemmaNotFound(String),

    #[error("placeholder location out of range: line {line} (source has {len} lines)")]
    LocationOutOfRange { line: usize, len: usize },

    #[error("source already contains a placeholder marker")]
    PlaceholderConflict,

    #[error("expected exactly one placeholder marker, found {0}")]
    PlaceholderCount(usize),

    #[error("prompt variant includes the error message but no error text was supplied")]
    MissingErrorText,

    #[error("candidate index {index} out of range ({available} candidate locations)")]
    CandidateIndexOutOfRange { index: usize, available: usize },

    #[error("lemma `{0}` already verifies; nothing to repair")]
    AlreadyVerifies(String),

    #[error("verifier backend failure: {0}")]
    VerifierInfra(String),

    #[error("LLM backend failure: {0}")]
    LlmBackend(String),

    #[error("mock fixture error: {0}")]
    Fixture(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of external infrastructure (verifier process, LLM
    /// endpoint, fixtures) as opposed to bad input or usage.
    pub fn is_infrastructure(&self) -> bool {
        matches!(
            self,
            Error::VerifierInfra(_) | Error::LlmBackend(_) | Error::Fixture(_) | Error::Io { .. }
        )
    }
}
