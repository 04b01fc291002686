//! Shared call context for every agent in a run.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::backend::{self, Backbone, BackendError, CallKind, CallTag, CompletionRequest, CompletionResponse, Message};
use crate::prompts::{PromptError, PromptRegistry};
use crate::search::{NoSearch, SearchHook};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CallError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("unknown backbone `{0}`")]
    UnknownBackbone(String),
}

/// Decoding settings per call family.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoding {
    pub stance_temperature: f64,
    pub deliberation_temperature: f64,
    /// Used for judging, rating, verification and posterior elicitation.
    pub judge_temperature: f64,
    pub max_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Self { stance_temperature: 0.7, deliberation_temperature: 0.7, judge_temperature: 0.0, max_tokens: 512 }
    }
}

/// One templated call: which template, with which variables, on whose behalf.
#[derive(Debug, Clone)]
pub struct Call<'a> {
    pub backbone: &'a str,
    pub question_id: &'a str,
    pub agent_id: &'a str,
    pub kind: CallKind,
    pub template: &'a str,
    pub variables: BTreeMap<String, String>,
    /// Appended after the rendered template, separated by a blank line.
    pub suffix: Option<String>,
    pub temperature: f64,
    pub want_token_probs: bool,
}

impl<'a> Call<'a> {
    pub fn new(backbone: &'a str, question_id: &'a str, agent_id: &'a str, kind: CallKind, template: &'a str) -> Self {
        Self {
            backbone,
            question_id,
            agent_id,
            kind,
            template,
            variables: BTreeMap::new(),
            suffix: None,
            temperature: 0.0,
            want_token_probs: false,
        }
    }

    pub fn var(mut self, name: &str, value: impl Into<String>) -> Self {
        self.variables.insert(name.to_string(), value.into());
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn suffix(mut self, s: impl Into<String>) -> Self {
        self.suffix = Some(s.into());
        self
    }

    pub fn token_probs(mut self, want: bool) -> Self {
        self.want_token_probs = want;
        self
    }
}

#[derive(Clone)]
pub struct Runtime {
    pub prompts: Arc<PromptRegistry>,
    pub backbones: HashMap<String, Backbone>,
    pub search: Arc<dyn SearchHook>,
    pub decoding: Decoding,
    pub seed: u64,
}

impl Runtime {
    pub fn new(backbones: impl IntoIterator<Item = Backbone>, seed: u64) -> Self {
        Self {
            prompts: Arc::new(PromptRegistry::builtin()),
            backbones: backbones.into_iter().map(|b| (b.name.clone(), b)).collect(),
            search: Arc::new(NoSearch),
            decoding: Decoding::default(),
            seed,
        }
    }

    pub fn with_search(mut self, search: Arc<dyn SearchHook>) -> Self {
        self.search = search;
        self
    }

    pub fn with_prompts(mut self, prompts: PromptRegistry) -> Self {
        self.prompts = Arc::new(prompts);
        self
    }

    pub fn backbone(&self, name: &str) -> Result<&Backbone, CallError> {
        self.backbones.get(name).ok_or_else(|| CallError::UnknownBackbone(name.to_string()))
    }

    /// Renders the template, sends it as a single user message and returns
    /// the reply. The tag carries the variables so simulated providers can
    /// read them directly.
    pub fn invoke(&self, call: Call<'_>) -> Result<CompletionResponse, CallError> {
        let backbone = self.backbone(call.backbone)?;
        let mut prompt = self.prompts.render(call.template, &call.variables)?;
        if let Some(suffix) = &call.suffix {
            prompt.push_str("\n\n");
            prompt.push_str(suffix);
        }
        let mut request = CompletionRequest::new(backbone.model_id.clone(), vec![Message::user(prompt)]);
        request.temperature = call.temperature;
        request.max_tokens = self.decoding.max_tokens;
        request.want_token_probs = call.want_token_probs;
        request.tag = Some(
            CallTag::new(call.question_id, call.agent_id, call.kind, call.template).with_variables(call.variables),
        );
        Ok(backend::complete(&request, backbone.provider.as_ref())?)
    }
}
