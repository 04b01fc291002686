//! Chat-completion HTTP client with retries and rate limiting.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use tracing::warn;

use super::ratelimit::RateLimiter;
use super::{BackendError, CompletionRequest, CompletionResponse, Provider};

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, base_delay: Duration::from_secs(1), max_delay: Duration::from_secs(30) }
    }
}

impl RetryPolicy {
    /// Backoff before retry number `retry` (0-based), without jitter.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry.min(16));
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub name: String,
    pub endpoint: String,
    pub api_key: Option<String>,
    pub supports_logprobs: bool,
    pub retry: RetryPolicy,
    pub requests_per_minute: Option<u32>,
    pub timeout: Duration,
}

impl HttpSettings {
    pub fn new(name: impl Into<String>, endpoint: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            endpoint: endpoint.into(),
            api_key: None,
            supports_logprobs: false,
            retry: RetryPolicy::default(),
            requests_per_minute: None,
            timeout: Duration::from_secs(120),
        }
    }
}

pub struct HttpProvider {
    settings: HttpSettings,
    agent: ureq::Agent,
    limiter: Option<RateLimiter>,
    jitter: Mutex<StdRng>,
}

enum Attempt {
    Retry(BackendError),
    Fatal(BackendError),
}

impl HttpProvider {
    pub fn new(settings: HttpSettings) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(settings.timeout))
            .build()
            .into();
        let limiter = settings.requests_per_minute.map(RateLimiter::per_minute);
        Self { settings, agent, limiter, jitter: Mutex::new(StdRng::from_entropy()) }
    }

    fn body(request: &CompletionRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| json!({ "role": m.role, "content": m.content }))
            .collect();
        let mut body = json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if request.want_token_probs {
            body["logprobs"] = Value::Bool(true);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<CompletionResponse, Attempt> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let mut req = self.agent.post(&self.settings.endpoint);
        if let Some(key) = &self.settings.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Attempt::Retry(BackendError::Transport(e.to_string())))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(BackendError::Transport(e.to_string())))?;
        match status {
            200..=299 => parse_response(&text).map_err(Attempt::Fatal),
            401 | 403 => Err(Attempt::Fatal(BackendError::Auth(status))),
            408 | 429 | 500..=599 => {
                Err(Attempt::Retry(BackendError::Transport(format!("HTTP {status}"))))
            }
            _ => Err(Attempt::Fatal(BackendError::Transport(format!("HTTP {status}: {text}")))),
        }
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        &self.settings.name
    }

    fn supports_token_probs(&self) -> bool {
        self.settings.supports_logprobs
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        // Serialized once; every retry resends the same bytes.
        let body = Self::body(request);
        let attempts = self.settings.retry.attempts.max(1);
        let mut last = BackendError::Transport("no attempt made".into());
        for n in 0..attempts {
            match self.attempt(&body) {
                Ok(resp) => return Ok(resp),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    warn!(provider = %self.settings.name, attempt = n + 1, error = %e, "request failed");
                    last = e;
                    if n + 1 < attempts {
                        let delay = self.settings.retry.delay(n);
                        let jitter = {
                            let mut rng = self.jitter.lock().unwrap_or_else(|p| p.into_inner());
                            delay.mul_f64(rng.gen_range(0.0..0.25))
                        };
                        thread::sleep(delay + jitter);
                    }
                }
            }
        }
        Err(last)
    }
}

/// Parses a chat-completion response body: text from
/// `choices[0].message.content`, token probabilities from
/// `choices[0].logprobs.content[*].logprob` when present.
pub fn parse_response(body: &str) -> Result<CompletionResponse, BackendError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| BackendError::MalformedResponse(format!("invalid JSON: {e}")))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::MalformedResponse("missing choices[0]".into()))?;
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::MalformedResponse("missing choices[0].message.content".into()))?
        .to_string();

    let token_probs = match choice.pointer("/logprobs/content").and_then(Value::as_array) {
        Some(items) if !items.is_empty() => {
            let mut probs = Vec::with_capacity(items.len());
            for item in items {
                let lp = item
                    .get("logprob")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| BackendError::MalformedResponse("logprob entry without value".into()))?;
                if lp > 0.0 || lp.is_nan() {
                    return Err(BackendError::MalformedResponse(format!("positive logprob {lp}")));
                }
                probs.push(lp.exp().max(f64::MIN_POSITIVE));
            }
            Some(probs)
        }
        _ => None,
    };

    let mut provider_meta = BTreeMap::new();
    for key in ["id", "model"] {
        if let Some(s) = v.get(key).and_then(Value::as_str) {
            provider_meta.insert(key.to_string(), s.to_string());
        }
    }
    if let Some(s) = choice.get("finish_reason").and_then(Value::as_str) {
        provider_meta.insert("finish_reason".into(), s.to_string());
    }
    Ok(CompletionResponse { text, token_probs, provider_meta })
}
