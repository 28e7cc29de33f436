//! TOML configuration for backends and the repair loop.

use crate::backends::{LlmBackend, MockLlm, MockVerifier, ProcessVerifier, VerifierBackend};
use crate::driver::RepairConfig;
use crate::localization::BranchReading;
use crate::prompting::ErrorPosition;
use crate::selection::ExampleOrder;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifierKind {
    /// External verifier process (the command template below).
    Real,
    #[default]
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmKind {
    /// Chat-completions HTTP endpoint.
    Real,
    #[default]
    Mock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierConfig {
    pub backend: VerifierKind,
    /// Command template; `{file}` is substituted per run.
    pub command: String,
    /// Option prepended to the lemma name for filtered verification; empty
    /// disables filtering (whole-file verification).
    pub filter_option: String,
    pub timeout_ms: u64,
    /// Fixture path for the mock backend.
    pub fixture: Option<PathBuf>,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            backend: VerifierKind::Mock,
            command: "dafny verify --allow-warnings {file}".to_owned(),
            filter_option: "--filter-symbol".to_owned(),
            timeout_ms: 120_000,
            fixture: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub backend: LlmKind,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub n_samples: usize,
    /// Name of the environment variable holding the API credential. The
    /// credential itself never lives in config files.
    pub api_key_env: String,
    /// Fixture path for the mock backend.
    pub fixture: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            backend: LlmKind::Mock,
            endpoint: "https://api.openai.com/v1/chat/completions".to_owned(),
            model: "gpt-4o".to_owned(),
            temperature: 1.0,
            n_samples: 10,
            api_key_env: "LLM_API_KEY".to_owned(),
            fixture: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RepairSection {
    pub k: usize,
    pub m: usize,
    pub candidate_index: usize,
    pub iterative: bool,
    pub example_order: ExampleOrder,
    pub error_position: ErrorPosition,
    pub branch_reading: BranchReading,
}

impl Default for RepairSection {
    fn default() -> Self {
        RepairSection {
            k: 10,
            m: 6,
            candidate_index: 0,
            iterative: false,
            example_order: ExampleOrder::default(),
            error_position: ErrorPosition::default(),
            branch_reading: BranchReading::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub verifier: VerifierConfig,
    pub llm: LlmConfig,
    pub repair: RepairSection,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file; fixture paths inside are resolved relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if let Some(f) = &config.verifier.fixture {
            if f.is_relative() {
                config.verifier.fixture = Some(base.join(f));
            }
        }
        if let Some(f) = &config.llm.fixture {
            if f.is_relative() {
                config.llm.fixture = Some(base.join(f));
            }
        }
        Ok(config)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.verifier.timeout_ms)
    }

    pub fn build_verifier(&self) -> Result<Box<dyn VerifierBackend>> {
        match self.verifier.backend {
            VerifierKind::Real => {
                let filter = if self.verifier.filter_option.is_empty() {
                    None
                } else {
                    Some(self.verifier.filter_option.clone())
                };
                Ok(Box::new(ProcessVerifier::new(
                    &self.verifier.command,
                    filter,
                )))
            }
            VerifierKind::Mock => {
                let path = self.verifier.fixture.as_ref().ok_or_else(|| {
                    Error::Config("mock verifier needs a fixture path".to_owned())
                })?;
                Ok(Box::new(MockVerifier::from_file(path)?))
            }
        }
    }

    pub fn build_llm(&self) -> Result<Box<dyn LlmBackend>> {
        match self.llm.backend {
            LlmKind::Real => {
                #[cfg(feature = "http")]
                {
                    Ok(Box::new(crate::backends::HttpLlm::new(
                        self.llm.endpoint.clone(),
                        self.llm.api_key_env.clone(),
                    )?))
                }
                #[cfg(not(feature = "http"))]
                {
                    Err(Error::Config(
                        "built without the `http` feature; only the mock LLM is available"
                            .to_owned(),
                    ))
                }
            }
            LlmKind::Mock => {
                let path = self
                    .llm
                    .fixture
                    .as_ref()
                    .ok_or_else(|| Error::Config("mock LLM needs a fixture path".to_owned()))?;
                Ok(Box::new(MockLlm::from_file(path)?))
            }
        }
    }

    /// Repair-loop settings with the prompt variant and selection strategy
    /// supplied by the caller (they are per-invocation, not per-config).
    pub fn repair_config(
        &self,
        variant: crate::driver::VariantSpec,
        strategy: crate::selection::SelectionStrategy,
    ) -> RepairConfig {
        RepairConfig {
            k: self.repair.k,
            m: self.repair.m,
            variant,
            strategy,
            example_order: self.repair.example_order,
            candidate_index: self.repair.candidate_index,
            iterative: self.repair.iterative,
            branch_reading: self.repair.branch_reading,
            error_position: self.repair.error_position,
            timeout: self.timeout(),
            model: self.llm.model.clone(),
            temperature: self.llm.temperature,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_experiment_setup() {
        let config = Config::default();
        assert_eq!(config.repair.k, 10);
        assert_eq!(config.repair.m, 6);
        assert_eq!(config.llm.temperature, 1.0);
        assert_eq!(config.verifier.timeout_ms, 120_000);
    }

    #[test]
    fn parses_partial_toml_with_defaults() {
        let config = Config::parse(
            "[verifier]\nbackend = \"real\"\ncommand = \"dafny verify {file}\"\n\n[repair]\nk = 5\n",
        )
        .unwrap();
        assert_eq!(config.verifier.backend, VerifierKind::Real);
        assert_eq!(config.repair.k, 5);
        assert_eq!(config.repair.m, 6);
    }

    #[test]
    fn fixture_paths_resolve_relative_to_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("asserthint.toml");
        std::fs::write(
            &config_path,
            "[verifier]\nfixture = \"mocks/v.json\"\n\n[llm]\nfixture = \"/abs/l.json\"\n",
        )
        .unwrap();
        let config = Config::load(&config_path).unwrap();
        assert_eq!(
            config.verifier.fixture,
            Some(dir.path().join("mocks/v.json"))
        );
        assert_eq!(config.llm.fixture, Some(PathBuf::from("/abs/l.json")));
    }

    #[test]
    fn mock_backends_require_fixture_paths() {
        let config = Config::default();
        assert!(config.build_verifier().is_err());
        assert!(config.build_llm().is_err());
    }
}
