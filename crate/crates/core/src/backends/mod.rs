//! Pluggable verifier and LLM adapters.
//!
//! Everything that talks to the outside world lives behind the two traits
//! here; no other module spawns processes or opens sockets. The mock
//! adapters replay scripted fixtures, which makes the whole pipeline
//! bit-deterministic given a seed, so every test and every CLI subcommand
//! can run offline with `--backend mock`.

mod mock;
mod process;

#[cfg(feature = "http")]
mod http;

pub use mock::{LlmTrigger, MockLlm, MockVerifier, VerdictRule, VerdictSpec};
pub use process::ProcessVerifier;

#[cfg(feature = "http")]
pub use http::HttpLlm;

use crate::prompting::ChatPrompt;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictStatus {
    Verified,
    /// Carries the full captured diagnostic text, verbatim; this is the
    /// input to error-message parsing.
    Failed(String),
    Timeout,
    Crashed(String),
}

impl VerdictStatus {
    pub fn is_verified(&self) -> bool {
        matches!(self, VerdictStatus::Verified)
    }

    /// Diagnostic text for failed runs, empty otherwise.
    pub fn output(&self) -> &str {
        match self {
            VerdictStatus::Failed(text) | VerdictStatus::Crashed(text) => text,
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierVerdict {
    pub status: VerdictStatus,
    pub duration: Duration,
}

impl VerifierVerdict {
    pub fn new(status: VerdictStatus, duration: Duration) -> Self {
        VerifierVerdict { status, duration }
    }
}

/// Runs the verifier on one file, optionally restricted to a single lemma.
/// Infrastructure failures surface as `Crashed` verdicts, never panics, and
/// the input file is never mutated.
pub trait VerifierBackend: Send + Sync {
    fn verify(&self, file: &Path, lemma_filter: Option<&str>, timeout: Duration)
        -> VerifierVerdict;
}

#[derive(Debug, Clone)]
pub struct LlmRequest {
    pub prompt: ChatPrompt,
    pub n_samples: usize,
    pub temperature: f64,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmResponse {
    /// At most `n_samples` completions, order preserved as produced.
    pub completions: Vec<String>,
}

/// Requests `n_samples` completions in one call.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse>;
}
