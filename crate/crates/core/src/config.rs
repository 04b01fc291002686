//! Run configuration, loaded from TOML.
//!
//! ```toml
//! seed = 7
//! backend = "simulated"
//! ensemble_size = 6
//! expert_backbones = ["gpt35"]
//! deliberator_backbone = "gpt35"
//!
//! [backbones.gpt35]
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! model = "gpt-3.5-turbo"
//! api_key_env = "OPENAI_API_KEY"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::http::{HttpProvider, HttpSettings, RetryPolicy};
use crate::backend::sim::{SimAgentParams, SimLogprobs, SimProvider, SimWorld};
use crate::backend::Backbone;
use crate::dataset::DatasetRecord;
use crate::deliberation::{DeliberationSettings, Verifier};
use crate::ensemble::{EquivalenceJudge, JudgeMode, Skill};
use crate::prompts::PromptRegistry;
use crate::runtime::{Decoding, Runtime};
use crate::search::{HttpSearch, NoSearch, SearchHook, StubSearch};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("environment variable {0} is not set")]
    MissingKey(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Http,
    #[default]
    Simulated,
}

impl std::str::FromStr for BackendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(Self::Http),
            "simulated" | "sim" => Ok(Self::Simulated),
            other => Err(format!("unknown backend `{other}` (expected http or simulated)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    None,
    /// Gold-derived hits in simulated runs; a JSONL file when `search_stub_path` is set.
    #[default]
    Stub,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneConfig {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub logprobs: bool,
    pub requests_per_minute: Option<u32>,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub default: SimAgentParams,
    /// Parameters for deliberators, verifier and judge; falls back to `default`.
    pub deliberator: Option<SimAgentParams>,
    /// Agent-id prefix to parameters; the longest matching prefix wins.
    #[serde(default)]
    pub overrides: BTreeMap<String, SimAgentParams>,
    /// Simulated backbones that report token probabilities.
    #[serde(default)]
    pub logprob_backbones: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub backend: BackendMode,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_ensemble_size")]
    pub ensemble_size: usize,
    #[serde(default = "default_feedback")]
    pub feedback_per_argument: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_validation_m")]
    pub validation_m: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Run agent selection on the validation split; otherwise skills share
    /// slots evenly.
    #[serde(default = "default_true")]
    pub selection: bool,
    #[serde(default = "default_skills")]
    pub candidate_skills: Vec<Skill>,
    #[serde(default = "default_backbones")]
    pub expert_backbones: Vec<String>,
    #[serde(default = "default_backbone")]
    pub deliberator_backbone: String,
    /// Defaults to `ensemble_size`.
    pub deliberators: Option<usize>,
    #[serde(default = "default_judge_mode")]
    pub judge_mode: JudgeMode,
    /// Defaults to the deliberator backbone.
    pub judge_backbone: Option<String>,
    /// Defaults to the deliberator backbone.
    pub verifier_backbone: Option<String>,
    #[serde(default = "default_true")]
    pub verifier_enabled: bool,
    #[serde(default = "default_temperature")]
    pub stance_temperature: f64,
    #[serde(default = "default_temperature")]
    pub deliberation_temperature: f64,
    #[serde(default)]
    pub judge_temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Directory of `<template>.txt` files overriding the built-in prompts.
    pub prompts_dir: Option<PathBuf>,
    #[serde(default)]
    pub search: SearchMode,
    pub search_endpoint: Option<String>,
    pub search_api_key_env: Option<String>,
    pub search_stub_path: Option<PathBuf>,
    #[serde(default)]
    pub backbones: BTreeMap<String, BackboneConfig>,
    #[serde(default)]
    pub sim: SimConfig,
}

fn default_parallelism() -> usize {
    4
}
fn default_ensemble_size() -> usize {
    6
}
fn default_feedback() -> usize {
    2
}
fn default_tau() -> f64 {
    0.2
}
fn default_validation_m() -> usize {
    16
}
fn default_bins() -> usize {
    10
}
fn default_true() -> bool {
    true
}
fn default_skills() -> Vec<Skill> {
    Skill::EXPERTS.to_vec()
}
fn default_backbone() -> String {
    "sim".to_string()
}
fn default_backbones() -> Vec<String> {
    vec![default_backbone()]
}
fn default_judge_mode() -> JudgeMode {
    JudgeMode::Llm
}
fn default_temperature() -> f64 {
    0.7
}
fn default_max_tokens() -> u32 {
    512
}
fn default_retries() -> u32 {
    3
}
fn default_timeout() -> u64 {
    120
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.ensemble_size < 1 {
            return fail("ensemble_size must be at least 1".into());
        }
        if self.feedback_per_argument < 1 {
            return fail("feedback_per_argument must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return fail(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        if self.bins < 1 {
            return fail("bins must be at least 1".into());
        }
        if self.parallelism < 1 {
            return fail("parallelism must be at least 1".into());
        }
        if self.selection && self.validation_m < 1 {
            return fail("validation_m must be at least 1 when selection is on".into());
        }
        if self.deliberators == Some(0) {
            return fail("deliberators must be at least 1".into());
        }
        if self.expert_backbones.is_empty() {
            return fail("expert_backbones must not be empty".into());
        }
        if self.candidate_skills.is_empty() || self.candidate_skills.contains(&Skill::General) {
            return fail("candidate_skills must be a non-empty list of expert skills".into());
        }
        for (name, t) in [
            ("stance_temperature", self.stance_temperature),
            ("deliberation_temperature", self.deliberation_temperature),
            ("judge_temperature", self.judge_temperature),
        ] {
            if !(0.0..=2.0).contains(&t) {
                return fail(format!("{name} must lie in [0, 2], got {t}"));
            }
        }
        let sims = std::iter::once(("sim.default", &self.sim.default))
            .chain(self.sim.deliberator.iter().map(|p| ("sim.deliberator", p)))
            .chain(self.sim.overrides.values().map(|p| ("sim.overrides", p)));
        for (name, params) in sims {
            params.validate().map_err(|e| ConfigError::Invalid(format!("{name}: {e}")))?;
        }
        if self.backend == BackendMode::Http {
            for bb in self.backbone_names() {
                let Some(cfg) = self.backbones.get(&bb) else {
                    return fail(format!("backbone `{bb}` has no [backbones.{bb}] section"));
                };
                if cfg.endpoint.is_none() || cfg.model.is_none() {
                    return fail(format!("backbone `{bb}` needs endpoint and model"));
                }
            }
            if self.search == SearchMode::Http && self.search_endpoint.is_none() {
                return fail("search = \"http\" needs search_endpoint".into());
            }
        }
        Ok(())
    }

    /// Every backbone the run will call, sorted.
    pub fn backbone_names(&self) -> BTreeSet<String> {
        let mut names: BTreeSet<String> = self.expert_backbones.iter().cloned().collect();
        names.insert(self.deliberator_backbone.clone());
        names.insert(self.judge_backbone_name().to_string());
        names.insert(self.verifier_backbone_name().to_string());
        names
    }

    fn judge_backbone_name(&self) -> &str {
        self.judge_backbone.as_deref().unwrap_or(&self.deliberator_backbone)
    }

    fn verifier_backbone_name(&self) -> &str {
        self.verifier_backbone.as_deref().unwrap_or(&self.deliberator_backbone)
    }

    pub fn judge(&self) -> EquivalenceJudge {
        match self.judge_mode {
            JudgeMode::Llm => EquivalenceJudge::llm(self.judge_backbone_name()),
            JudgeMode::NormalizedExactMatch => EquivalenceJudge::exact(),
        }
    }

    pub fn verifier(&self) -> Verifier {
        if self.verifier_enabled {
            Verifier::new(self.verifier_backbone_name())
        } else {
            Verifier::offline()
        }
    }

    pub fn deliberation_settings(&self) -> DeliberationSettings {
        DeliberationSettings {
            backbone: self.deliberator_backbone.clone(),
            deliberators: self.deliberators.unwrap_or(self.ensemble_size),
            feedback_per_argument: self.feedback_per_argument,
            verifier: self.verifier(),
        }
    }

    pub fn decoding(&self) -> Decoding {
        Decoding {
            stance_temperature: self.stance_temperature,
            deliberation_temperature: self.deliberation_temperature,
            judge_temperature: self.judge_temperature,
            max_tokens: self.max_tokens,
        }
    }

    fn sim_provider(&self, name: &str, world: &Arc<SimWorld>) -> SimProvider {
        let mut provider = SimProvider::new(name, self.seed, self.sim.default.clone(), Arc::clone(world));
        if let Some(params) = &self.sim.deliberator {
            for prefix in [
                format!("{}/general/", self.deliberator_backbone),
                "verifier".to_string(),
                "judge".to_string(),
            ] {
                provider = provider.with_override(prefix, params.clone());
            }
        }
        for (prefix, params) in &self.sim.overrides {
            provider = provider.with_override(prefix.clone(), params.clone());
        }
        if self.sim.logprob_backbones.iter().any(|b| b == name) {
            provider = provider.with_logprobs(SimLogprobs::FromConfidence);
        }
        provider
    }

    fn http_provider(&self, name: &str) -> Result<HttpProvider, ConfigError> {
        let cfg = self
            .backbones
            .get(name)
            .ok_or_else(|| ConfigError::Invalid(format!("backbone `{name}` has no [backbones.{name}] section")))?;
        let endpoint = cfg.endpoint.clone().ok_or_else(|| ConfigError::Invalid(format!("backbone `{name}` needs endpoint")))?;
        let mut settings = HttpSettings::new(name, endpoint);
        settings.api_key = cfg.api_key_env.as_deref().map(read_env).transpose()?;
        settings.supports_logprobs = cfg.logprobs;
        settings.requests_per_minute = cfg.requests_per_minute;
        settings.retry = RetryPolicy { attempts: cfg.retries.max(1), ..RetryPolicy::default() };
        settings.timeout = Duration::from_secs(cfg.timeout_secs);
        Ok(HttpProvider::new(settings))
    }

    fn model_id(&self, name: &str) -> String {
        self.backbones.get(name).and_then(|b| b.model.clone()).unwrap_or_else(|| name.to_string())
    }

    fn search_hook(&self, dataset: &[DatasetRecord]) -> Result<Arc<dyn SearchHook>, ConfigError> {
        Ok(match self.search {
            SearchMode::None => Arc::new(NoSearch),
            SearchMode::Stub => match &self.search_stub_path {
                Some(path) => Arc::new(StubSearch::load(path).map_err(|e| ConfigError::Invalid(e.to_string()))?),
                None if self.backend == BackendMode::Simulated => Arc::new(StubSearch::from_references(dataset)),
                None => Arc::new(NoSearch),
            },
            SearchMode::Http => {
                let endpoint = self
                    .search_endpoint
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("search = \"http\" needs search_endpoint".into()))?;
                let key = self.search_api_key_env.as_deref().map(read_env).transpose()?;
                Arc::new(HttpSearch::new(endpoint, key))
            }
        })
    }

    /// Providers, prompts, search and decoding for a run over `dataset`. In
    /// simulated mode the dataset's references are the simulator's ground truth.
    pub fn build_runtime(&self, dataset: &[DatasetRecord]) -> Result<Runtime, ConfigError> {
        let world: Arc<SimWorld> = Arc::new(dataset.iter().map(|r| (r.id.clone(), r.references())).collect());
        let mut backbones = Vec::new();
        for name in self.backbone_names() {
            let provider: crate::backend::ProviderHandle = match self.backend {
                BackendMode::Simulated => Arc::new(self.sim_provider(&name, &world)),
                BackendMode::Http => Arc::new(self.http_provider(&name)?),
            };
            backbones.push(Backbone { model_id: self.model_id(&name), name, provider });
        }
        let mut rt = Runtime::new(backbones, self.seed).with_search(self.search_hook(dataset)?);
        if let Some(dir) = &self.prompts_dir {
            rt = rt.with_prompts(PromptRegistry::from_dir(dir).map_err(|e| ConfigError::Invalid(e.to_string()))?);
        }
        rt.decoding = self.decoding();
        Ok(rt)
    }
}

fn read_env(var: &str) -> Result<String, ConfigError> {
    std::env::var(var).map_err(|_| ConfigError::MissingKey(var.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.ensemble_size, c.feedback_per_argument, c.tau, c.validation_m, c.bins), (6, 2, 0.2, 16, 10));
        assert_eq!(c.backend, BackendMode::Simulated);
        assert_eq!(c.candidate_skills, Skill::EXPERTS.to_vec());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml("tau = 1.5").is_err());
        assert!(RunConfig::from_toml("ensemble_size = 0").is_err());
        assert!(RunConfig::from_toml("bins = 0").is_err());
        assert!(RunConfig::from_toml("feedback_per_argument = 0").is_err());
        assert!(RunConfig::from_toml("candidate_skills = [\"general\"]").is_err());
        assert!(RunConfig::from_toml("unknown_key = 1").is_err());
        assert!(RunConfig::from_toml("[sim.default]\naccuracy = 2.0").is_err());
    }

    #[test]
    fn http_needs_backbone_sections() {
        let err = RunConfig::from_toml("backend = \"http\"").unwrap_err();
        assert!(err.to_string().contains("[backbones.sim]"), "{err}");
        let ok = RunConfig::from_toml(
            "backend = \"http\"\n[backbones.sim]\nendpoint = \"http://localhost:1\"\nmodel = \"m\"\n",
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn missing_key_env_is_reported() {
        let c = RunConfig::from_toml(
            "backend = \"http\"\n[backbones.sim]\nendpoint = \"http://localhost:1\"\nmodel = \"m\"\napi_key_env = \"COLLABCAL_TEST_UNSET_KEY\"\n",
        )
        .unwrap();
        assert!(matches!(c.build_runtime(&[]), Err(ConfigError::MissingKey(_))));
    }

    #[test]
    fn sim_runtime_has_every_backbone() {
        let c = RunConfig::from_toml("expert_backbones = [\"a\", \"b\"]\ndeliberator_backbone = \"c\"").unwrap();
        let rt = c.build_runtime(&[]).unwrap();
        let mut names: Vec<&String> = rt.backbones.keys().collect();
        names.sort();
        assert_eq!(names, ["a", "b", "c"]);
    }
}
