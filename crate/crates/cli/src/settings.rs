//! Config file and environment overrides.

use std::path::{Path, PathBuf};

use chemreason::pipeline::GenerationConfig;
use chemreason::rlcore::{AccuracyVariant, RewardSpec};
use serde::Deserialize;

use crate::CliError;

pub const BASE_URL_ENV: &str = "CHEMREASON_BASE_URL";
pub const CACHE_DIR_ENV: &str = "CHEMREASON_CACHE_DIR";
const CACHE_FILE: &str = "iupac_cache.json";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub generation: GenerationConfig,
    pub reward: RewardSpec,
}

impl Settings {
    pub fn load(path: Option<&Path>, env: &dyn Fn(&str) -> Option<String>) -> Result<Settings, CliError> {
        let mut s = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Settings::default(),
        };
        if let Some(url) = env(BASE_URL_ENV).filter(|u| !u.is_empty()) {
            s.generation.generator.base_url = url.clone();
            s.generation.verifier.base_url = url;
        }
        if s.generation.lookup.cache_path.is_none() {
            if let Some(dir) = env(CACHE_DIR_ENV).filter(|d| !d.is_empty()) {
                s.generation.lookup.cache_path = Some(PathBuf::from(dir).join(CACHE_FILE));
            }
        }
        s.generation.validate().map_err(|e| CliError::Config(e.to_string()))?;
        s.reward.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(s)
    }

    /// Reward settings with an optional variant override from the command line.
    pub fn reward_spec(&self, variant: Option<&str>) -> Result<RewardSpec, CliError> {
        let mut spec = self.reward;
        if let Some(v) = variant {
            spec.accuracy_variant = v
                .parse::<AccuracyVariant>()
                .map_err(|e| CliError::Config(format!("--variant: {e}")))?;
        }
        Ok(spec)
    }
}
