//! Generation settings, loadable from any serde format (the CLI uses TOML).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::filters::StructuralRules;
use super::limits::{RateLimit, RetryPolicy};
use super::lookup::PUBCHEM_BASE;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    /// Offline oracle that always answers with the reference.
    #[default]
    Mock,
    /// Recorded replies keyed by request.
    Replay,
    /// Live chat-completion endpoint.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub replay_path: Option<PathBuf>,
    pub temperature: Option<f64>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            mode: ProviderMode::Mock,
            base_url: "https://api.openai.com/v1".into(),
            model: "mock".into(),
            api_key_env: "CHEMREASON_API_KEY".into(),
            replay_path: None,
            temperature: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LookupConfig {
    pub enabled: bool,
    pub base_url: String,
    /// Never contact the service; answer from the cache only.
    pub offline: bool,
    pub cache_path: Option<PathBuf>,
}

impl Default for LookupConfig {
    fn default() -> Self {
        LookupConfig {
            enabled: true,
            base_url: PUBCHEM_BASE.into(),
            offline: true,
            cache_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// Template used for every sample; by default each task uses its own.
    pub prompt_template_id: Option<String>,
    pub generator: ProviderConfig,
    pub verifier: ProviderConfig,
    pub temperature: f64,
    pub verifier_temperature: f64,
    pub max_output_tokens: u32,
    pub concurrency_limit: usize,
    pub retry: RetryPolicy,
    pub rate_limit: Option<RateLimit>,
    /// Maximum provider calls per run, counting retries.
    pub call_budget: Option<u64>,
    pub structural: StructuralRules,
    pub lookup: LookupConfig,
    pub demos_path: Option<PathBuf>,
    /// External command that renders a SMILES argument and prints the image path.
    pub render_command: Option<Vec<String>>,
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            prompt_template_id: None,
            generator: ProviderConfig::default(),
            verifier: ProviderConfig::default(),
            temperature: 0.7,
            verifier_temperature: 0.0,
            max_output_tokens: 4096,
            concurrency_limit: 4,
            retry: RetryPolicy::default(),
            rate_limit: None,
            call_budget: None,
            structural: StructuralRules::default(),
            lookup: LookupConfig::default(),
            demos_path: None,
            render_command: None,
            checkpoint_path: None,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        if self.concurrency_limit < 1 {
            return err("concurrency_limit must be at least 1".into());
        }
        for (name, t) in [
            ("temperature", self.temperature),
            ("verifier_temperature", self.verifier_temperature),
        ] {
            if !(t.is_finite() && t >= 0.0) {
                return err(format!("{name} must be a non-negative number, got {t}"));
            }
        }
        if self.max_output_tokens == 0 {
            return err("max_output_tokens must be positive".into());
        }
        if self.retry.max_attempts == 0 {
            return err("retry.max_attempts must be at least 1".into());
        }
        if !(self.retry.multiplier.is_finite() && self.retry.multiplier >= 1.0) {
            return err("retry.multiplier must be at least 1".into());
        }
        if let Some(r) = self.rate_limit {
            if !(r.requests_per_second.is_finite() && r.requests_per_second > 0.0) || r.burst == 0 {
                return err("rate_limit needs a positive rate and burst".into());
            }
        }
        let s = &self.structural;
        if s.min_think_tokens > s.max_think_tokens {
            return err("structural.min_think_tokens exceeds max_think_tokens".into());
        }
        if s.grounding_phrases.iter().any(|p| p.trim().is_empty()) {
            return err("structural.grounding_phrases must not contain empty phrases".into());
        }
        for (name, p) in [("generator", &self.generator), ("verifier", &self.verifier)] {
            if p.mode == ProviderMode::Replay && p.replay_path.is_none() {
                return err(format!("{name}.replay_path is required in replay mode"));
            }
            if p.temperature.is_some_and(|t| !(t.is_finite() && t >= 0.0)) {
                return err(format!("{name}.temperature must be non-negative"));
            }
        }
        if self.render_command.as_ref().is_some_and(Vec::is_empty) {
            return err("render_command must name a program".into());
        }
        Ok(())
    }
}
