//! Text-generation providers.
//!
//! [`Provider`] is the single call surface every stage uses. Two
//! implementations ship: [`http::HttpProvider`] for chat-completion endpoints
//! and [`sim::SimProvider`], a seeded simulator for offline runs.

pub mod http;
pub mod ratelimit;
pub mod sim;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

/// What a call is for. Live providers ignore it; the simulator dispatches on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Stance,
    /// Intermediate step of a two-call expert strategy.
    Scaffold,
    Argument,
    Rating,
    Premise,
    Verify,
    Revise,
    Posterior,
    Judge,
}

impl CallKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CallKind::Stance => "stance",
            CallKind::Scaffold => "scaffold",
            CallKind::Argument => "argument",
            CallKind::Rating => "rating",
            CallKind::Premise => "premise",
            CallKind::Verify => "verify",
            CallKind::Revise => "revise",
            CallKind::Posterior => "posterior",
            CallKind::Judge => "judge",
        }
    }
}

impl fmt::Display for CallKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of a call plus the variables its prompt was rendered from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallTag {
    pub question_id: String,
    pub agent_id: String,
    pub kind: CallKind,
    pub template: String,
    pub variables: BTreeMap<String, String>,
}

impl CallTag {
    pub fn new(question_id: &str, agent_id: &str, kind: CallKind, template: &str) -> Self {
        Self {
            question_id: question_id.to_string(),
            agent_id: agent_id.to_string(),
            kind,
            template: template.to_string(),
            variables: BTreeMap::new(),
        }
    }

    pub fn with_variables(mut self, variables: BTreeMap<String, String>) -> Self {
        self.variables = variables;
        self
    }

    pub fn var(&self, name: &str) -> Option<&str> {
        self.variables.get(name).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_id: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub want_token_probs: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<CallTag>,
}

impl CompletionRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<Message>) -> Self {
        Self {
            model_id: model_id.into(),
            messages,
            temperature: 0.0,
            max_tokens: 256,
            want_token_probs: false,
            tag: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.messages.last() {
            None => return Err(BackendError::InvalidRequest("no messages".into())),
            Some(m) if m.role != Role::User => {
                return Err(BackendError::InvalidRequest("last message must be from the user".into()))
            }
            _ => {}
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be finite and non-negative, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_probs: Option<Vec<f64>>,
    #[serde(default)]
    pub provider_meta: BTreeMap<String, String>,
}

impl CompletionResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), token_probs: None, provider_meta: BTreeMap::new() }
    }

    pub(crate) fn check_token_probs(&self) -> Result<(), BackendError> {
        if let Some(probs) = &self.token_probs {
            if probs.is_empty() {
                return Err(BackendError::MalformedResponse("empty token probability list".into()));
            }
            if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
                return Err(BackendError::MalformedResponse(format!(
                    "token probability {p} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    fn supports_token_probs(&self) -> bool;

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

pub type ProviderHandle = Arc<dyn Provider>;

/// Validates the request, enforces the token-probability capability and
/// checks the response invariants before returning it.
pub fn complete(
    request: &CompletionRequest,
    provider: &dyn Provider,
) -> Result<CompletionResponse, BackendError> {
    request.validate()?;
    if request.want_token_probs && !provider.supports_token_probs() {
        return Err(BackendError::Capability(format!(
            "provider `{}` does not expose token probabilities",
            provider.name()
        )));
    }
    let mut response = provider.complete(request)?;
    if !request.want_token_probs {
        response.token_probs = None;
    }
    response.check_token_probs()?;
    Ok(response)
}

/// A named model binding: which provider serves it and under which model id.
#[derive(Clone)]
pub struct Backbone {
    pub name: String,
    pub model_id: String,
    pub provider: ProviderHandle,
}

impl Backbone {
    pub fn new(name: impl Into<String>, model_id: impl Into<String>, provider: ProviderHandle) -> Self {
        Self { name: name.into(), model_id: model_id.into(), provider }
    }

    pub fn supports_token_probs(&self) -> bool {
        self.provider.supports_token_probs()
    }
}

impl fmt::Debug for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backbone")
            .field("name", &self.name)
            .field("model_id", &self.model_id)
            .field("provider", &self.provider.name())
            .finish()
    }
}
