//! Deterministic mock backends for hermetic runs.

use super::{LlmBackend, LlmRequest, LlmResponse, VerdictStatus, VerifierBackend, VerifierVerdict};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Verdict shorthand used in fixtures: `"verified"`, `"timeout"`,
/// `{"failed": "..."}` or `{"crashed": "..."}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictSpec {
    Verified,
    Timeout,
    Failed(String),
    Crashed(String),
}

impl VerdictSpec {
    fn to_status(&self) -> VerdictStatus {
        match self {
            VerdictSpec::Verified => VerdictStatus::Verified,
            VerdictSpec::Timeout => VerdictStatus::Timeout,
            VerdictSpec::Failed(t) => VerdictStatus::Failed(t.clone()),
            VerdictSpec::Crashed(t) => VerdictStatus::Crashed(t.clone()),
        }
    }
}

/// One scripted rule; all present conditions must hold for the rule to fire.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictRule {
    /// File content contains this substring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    /// File content does NOT contain this substring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lacks: Option<String>,
    /// Hex SHA-256 of the exact file content.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_hash: Option<String>,
    /// The lemma filter passed to verify equals this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
    pub verdict: VerdictSpec,
}

impl VerdictRule {
    fn matches(&self, content: &str, lemma_filter: Option<&str>) -> bool {
        if let Some(s) = &self.contains {
            if !content.contains(s.as_str()) {
                return false;
            }
        }
        if let Some(s) = &self.lacks {
            if content.contains(s.as_str()) {
                return false;
            }
        }
        if let Some(h) = &self.content_hash {
            if sha256_hex(content) != *h {
                return false;
            }
        }
        if let Some(l) = &self.lemma {
            if lemma_filter != Some(l.as_str()) {
                return false;
            }
        }
        true
    }
}

/// Scripted verifier: rules are evaluated in order against the file content
/// (and lemma filter); the first match wins, else the default verdict. All
/// verdicts report a constant zero duration so replayed runs are
/// byte-identical.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct MockVerifier {
    #[serde(default)]
    pub rules: Vec<VerdictRule>,
    #[serde(default)]
    pub default: Option<VerdictSpec>,
    #[serde(skip)]
    calls: AtomicUsize,
}

impl MockVerifier {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(Error::Json)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn verified_by_default() -> Self {
        MockVerifier {
            default: Some(VerdictSpec::Verified),
            ..Default::default()
        }
    }

    pub fn failing_by_default(output: &str) -> Self {
        MockVerifier {
            default: Some(VerdictSpec::Failed(output.to_owned())),
            ..Default::default()
        }
    }

    pub fn rule(mut self, rule: VerdictRule) -> Self {
        self.rules.push(rule);
        self
    }

    /// Shorthand: content containing `needle` yields `verdict`.
    pub fn when_contains(self, needle: &str, verdict: VerdictSpec) -> Self {
        self.rule(VerdictRule {
            contains: Some(needle.to_owned()),
            verdict,
            lacks: None,
            content_hash: None,
            lemma: None,
        })
    }

    /// Shorthand: content lacking `needle` yields `verdict`.
    pub fn when_lacks(self, needle: &str, verdict: VerdictSpec) -> Self {
        self.rule(VerdictRule {
            lacks: Some(needle.to_owned()),
            verdict,
            contains: None,
            content_hash: None,
            lemma: None,
        })
    }

    /// Number of verify calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl VerifierBackend for MockVerifier {
    fn verify(
        &self,
        file: &Path,
        lemma_filter: Option<&str>,
        _timeout: Duration,
    ) -> VerifierVerdict {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let content = match std::fs::read_to_string(file) {
            Ok(c) => c,
            Err(e) => {
                return VerifierVerdict::new(
                    VerdictStatus::Crashed(format!("mock verifier could not read input: {e}")),
                    Duration::ZERO,
                )
            }
        };
        for rule in &self.rules {
            if rule.matches(&content, lemma_filter) {
                return VerifierVerdict::new(rule.verdict.to_status(), Duration::ZERO);
            }
        }
        match &self.default {
            Some(spec) => VerifierVerdict::new(spec.to_status(), Duration::ZERO),
            None => VerifierVerdict::new(
                VerdictStatus::Crashed("mock verifier: no rule matched and no default".into()),
                Duration::ZERO,
            ),
        }
    }
}

/// Trigger entry: fires when the rendered prompt contains `contains`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlmTrigger {
    pub contains: String,
    pub completions: Vec<String>,
}

/// Scripted LLM. Lookup order for a request: the SHA-256 of the prompt
/// transcript in `by_hash`, then the first substring trigger, then the
/// default list. The chosen list is cycled to produce exactly `n_samples`
/// completions.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct MockLlm {
    #[serde(default)]
    pub by_hash: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub triggers: Vec<LlmTrigger>,
    #[serde(default)]
    pub default: Option<Vec<String>>,
    #[serde(skip)]
    calls: AtomicUsize,
}

impl MockLlm {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(Error::Json)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// The key a prompt would be looked up under in `by_hash`.
    pub fn key_for(prompt: &crate::prompting::ChatPrompt) -> String {
        prompt.fingerprint()
    }

    pub fn with_default(completions: Vec<String>) -> Self {
        MockLlm {
            default: Some(completions),
            ..Default::default()
        }
    }

    pub fn trigger(mut self, contains: &str, completions: Vec<String>) -> Self {
        self.triggers.push(LlmTrigger {
            contains: contains.to_owned(),
            completions,
        });
        self
    }

    pub fn keyed(mut self, hash: String, completions: Vec<String>) -> Self {
        self.by_hash.insert(hash, completions);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmBackend for MockLlm {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let rendered = request.prompt.transcript();
        let key = Self::key_for(&request.prompt);

        let list = if let Some(list) = self.by_hash.get(&key) {
            list
        } else if let Some(t) = self
            .triggers
            .iter()
            .find(|t| rendered.contains(&t.contains))
        {
            &t.completions
        } else if let Some(d) = &self.default {
            d
        } else {
            return Err(Error::Fixture(format!(
                "mock LLM has no fixture for prompt {key}"
            )));
        };
        if list.is_empty() {
            return Err(Error::Fixture("mock LLM fixture list is empty".into()));
        }
        let completions = list
            .iter()
            .cycle()
            .take(request.n_samples)
            .cloned()
            .collect();
        Ok(LlmResponse { completions })
    }
}
