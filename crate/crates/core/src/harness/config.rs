use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, Baseline};
use crate::env::EnvConfig;
use crate::mb::MbConfig;
use crate::perception::PerceptionConfig;
use crate::sac::SacHyper;

/// Environment variable that overrides the master seed.
pub const SEED_ENV: &str = "GUAPO_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    pub iterations: usize,
    pub episodes_per_iteration: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            iterations: 60,
            episodes_per_iteration: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub trials: usize,
    /// Act with the policy mean rather than a sample.
    pub deterministic: bool,
    /// Seed of the evaluation streams; the master seed when absent.
    pub seed: Option<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            trials: 30,
            deterministic: false,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub baseline: Baseline,
    pub seed: u64,
    pub budget: Budget,
    pub eval: EvalConfig,
    pub env: EnvConfig,
    pub perception: PerceptionConfig,
    pub mb: MbConfig,
    pub sac: SacHyper,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            baseline: Baseline::Guapo,
            seed: 0,
            budget: Budget::default(),
            eval: EvalConfig::default(),
            env: EnvConfig::default(),
            perception: PerceptionConfig::default(),
            mb: MbConfig::default(),
            sac: SacHyper::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    /// Reads, applies `GUAPO_SEED` and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, path)?;
        cfg.apply_env_seed(std::env::var(SEED_ENV).ok().as_deref())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env_seed(&mut self, value: Option<&str>) -> Result<(), ConfigError> {
        if let Some(v) = value {
            self.seed = v.trim().parse().map_err(|_| invalid(SEED_ENV, format!("`{v}` is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.budget.iterations == 0 {
            return Err(invalid("budget.iterations", "must be at least 1"));
        }
        if self.budget.episodes_per_iteration == 0 {
            return Err(invalid("budget.episodes_per_iteration", "must be at least 1"));
        }
        if self.eval.trials == 0 {
            return Err(invalid("eval.trials", "must be at least 1"));
        }
        self.env.validate().map_err(|e| invalid("env", e))?;
        self.sac.validate().map_err(|e| invalid("sac", e))?;
        let p = &self.perception;
        if !(p.k_sigma >= 0.0) {
            return Err(invalid("perception.k_sigma", "must be non-negative"));
        }
        if p.hypotheses == 0 {
            return Err(invalid("perception.hypotheses", "must be at least 1"));
        }
        if !(p.bias_min >= 0.0 && p.bias_max >= p.bias_min) {
            return Err(invalid("perception.bias_min", "need 0 <= bias_min <= bias_max"));
        }
        p.intrinsics().map_err(|e| invalid("perception", e))?;
        if self.mb.dither_period == 0 {
            return Err(invalid("mb.dither_period", "must be at least 1"));
        }
        if !(self.mb.gain > 0.0 && self.mb.gain <= 1.0) {
            return Err(invalid("mb.gain", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            env: self.env.clone(),
            perception: self.perception.clone(),
            mb: self.mb.clone(),
            sac: self.sac.clone(),
        }
    }

    pub fn eval_seed(&self) -> u64 {
        self.eval.seed.unwrap_or(self.seed)
    }

    /// Every parameter, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_toml(text, Path::new("test.toml")).and_then(|c| c.validate().map(|_| c))
    }

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn sections_override_fields() {
        let cfg = parse("baseline = \"mb-dope\"\nseed = 12\n[budget]\niterations = 3\n[sac]\nhidden = [8]\n").unwrap();
        assert_eq!(cfg.baseline, Baseline::MbDope);
        assert_eq!(cfg.seed, 12);
        assert_eq!(cfg.budget.iterations, 3);
        assert_eq!(cfg.budget.episodes_per_iteration, 2);
        assert_eq!(cfg.sac.hidden, vec![8]);
    }

    #[test]
    fn resolved_text_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.eval.seed = Some(5);
        cfg.perception.k_sigma = 2.0;
        assert_eq!(parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_field() {
        match parse("[budget]\niterations = 0\n") {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "budget.iterations"),
            other => panic!("{other:?}"),
        }
        match parse("baseline = \"dope\"\n") {
            Err(ConfigError::Parse { message, .. }) => assert!(message.contains("baseline"), "{message}"),
            other => panic!("{other:?}"),
        }
        match parse("[sac]\nlearning_rate = 1.0\n") {
            Err(ConfigError::Parse { message, .. }) => assert!(message.contains("learning_rate"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn env_seed_override() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_env_seed(Some("42")).unwrap();
        assert_eq!(cfg.seed, 42);
        cfg.apply_env_seed(None).unwrap();
        assert_eq!(cfg.seed, 42);
        assert!(cfg.apply_env_seed(Some("-1")).is_err());
    }
}
