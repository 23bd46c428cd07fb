//! Remote text-generation agents.
//!
//! The HTTP layer is abstracted behind [`Transport`] so the retry contract,
//! request shape and response parsing live here and can be tested without a
//! network; the command-line crate provides the real HTTPS transport.

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

use super::parse::{parse_receiver_output, parse_sender_output};
use super::prompts::PromptTemplates;
use super::{Observation, ReceiverAction, ReceiverPolicy, SenderContext, SenderPolicy};
use crate::config::Message;

pub const DEFAULT_API_KEY_ENV: &str = "MIXTALK_API_KEY";
/// Attempts per agent turn before the output is declared malformed.
pub const AGENT_RETRY_BUDGET: usize = 3;

fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.into()
}
fn default_temperature() -> f64 {
    0.7
}
fn default_max_tokens() -> u32 {
    16_384
}
fn default_timeout() -> u64 {
    120
}
fn default_attempts() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_in_flight() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base address of a chat-completions compatible service.
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub requests_per_minute: Option<u32>,
}

impl EndpointConfig {
    pub fn new(base_url: &str, model: &str) -> Self {
        serde_json::from_value(json!({ "base_url": base_url, "model": model }))
            .expect("defaults fill the rest")
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub fn request_body(&self, system: &str, user: &str) -> Value {
        json!({
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        })
    }
}

/// One HTTP POST. Returns the status code and body, or a transport error.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value, timeout: Duration) -> Result<(u16, String)>;
}

/// Anything that turns a (system, user) prompt pair into completion text.
pub trait TextGenerator: Send + Sync {
    fn generate(&self, system: &str, user: &str) -> Result<String>;
}

fn transient(e: &Error) -> bool {
    match e {
        Error::Transport(_) | Error::Timeout => true,
        Error::Service(code) => *code == 429 || *code >= 500,
        _ => false,
    }
}

/// Sends one chat-completion request with bounded retries and exponential
/// backoff on transient failures. Non-transient service errors fail at once.
pub fn remote_generate(
    transport: &dyn Transport,
    endpoint: &EndpointConfig,
    system: &str,
    user: &str,
) -> Result<String> {
    let key = std::env::var(&endpoint.api_key_env).ok();
    let body = endpoint.request_body(system, user);
    let url = endpoint.completions_url();
    let attempts = endpoint.max_attempts.max(1);
    let mut last = Error::Transport("no attempt made".into());
    for attempt in 0..attempts {
        if attempt > 0 {
            let wait = endpoint.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
            std::thread::sleep(Duration::from_millis(wait));
        }
        log::debug!("POST {url} model={} attempt={}", endpoint.model, attempt + 1);
        let outcome = transport
            .post_json(&url, key.as_deref(), &body, Duration::from_secs(endpoint.timeout_secs))
            .and_then(|(status, text)| {
                if (200..300).contains(&status) {
                    completion_text(&text)
                } else {
                    Err(Error::Service(status))
                }
            });
        match outcome {
            Ok(text) => {
                log::debug!("completion ({} chars) from {}", text.len(), endpoint.model);
                return Ok(text);
            }
            Err(e) if transient(&e) => {
                log::warn!("transient failure from {}: {e}", endpoint.model);
                last = e;
            }
            Err(e) => return Err(e),
        }
    }
    Err(match last {
        Error::Service(_) | Error::Timeout => last,
        other => Error::Transport(other.to_string()),
    })
}

fn completion_text(body: &str) -> Result<String> {
    let v: Value = serde_json::from_str(body).map_err(|e| Error::Parse(format!("response body: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::Parse("response has no choices[0].message.content".into()))
}

/// Client-side concurrency contract: at most `max_in_flight` outstanding
/// requests and an optional minimum spacing derived from a per-minute cap.
pub struct RateLimiter {
    max_in_flight: usize,
    spacing: Option<Duration>,
    state: Mutex<(usize, Option<Instant>)>,
    freed: Condvar,
}

impl RateLimiter {
    pub fn new(max_in_flight: usize, requests_per_minute: Option<u32>) -> Self {
        Self {
            max_in_flight: max_in_flight.max(1),
            spacing: requests_per_minute
                .filter(|r| *r > 0)
                .map(|r| Duration::from_secs_f64(60.0 / r as f64)),
            state: Mutex::new((0, None)),
            freed: Condvar::new(),
        }
    }

    pub fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut st = self.state.lock().expect("limiter lock");
            while st.0 >= self.max_in_flight {
                st = self.freed.wait(st).expect("limiter lock");
            }
            if let (Some(gap), Some(last)) = (self.spacing, st.1) {
                let next = last + gap;
                let now = Instant::now();
                if next > now {
                    std::thread::sleep(next - now);
                }
            }
            st.0 += 1;
            st.1 = Some(Instant::now());
        }
        let out = f();
        self.state.lock().expect("limiter lock").0 -= 1;
        self.freed.notify_one();
        out
    }
}

/// [`TextGenerator`] over a [`Transport`] with retries and rate limiting.
pub struct EndpointGenerator {
    transport: Arc<dyn Transport>,
    endpoint: EndpointConfig,
    limiter: RateLimiter,
}

impl EndpointGenerator {
    pub fn new(transport: Arc<dyn Transport>, endpoint: EndpointConfig) -> Self {
        let limiter = RateLimiter::new(endpoint.max_in_flight, endpoint.requests_per_minute);
        Self {
            transport,
            endpoint,
            limiter,
        }
    }
}

impl TextGenerator for EndpointGenerator {
    fn generate(&self, system: &str, user: &str) -> Result<String> {
        self.limiter
            .run(|| remote_generate(self.transport.as_ref(), &self.endpoint, system, user))
    }
}

pub struct RemoteSender {
    name: String,
    generator: Arc<dyn TextGenerator>,
    templates: PromptTemplates,
}

impl RemoteSender {
    pub fn new(name: &str, generator: Arc<dyn TextGenerator>) -> Self {
        Self {
            name: name.to_string(),
            generator,
            templates: PromptTemplates::default(),
        }
    }
}

impl SenderPolicy for RemoteSender {
    fn act(&self, ctx: &SenderContext<'_>) -> Result<Message> {
        let prompt = self.templates.render_sender(ctx.public_spec, ctx.theta)?;
        let mut last = String::new();
        for _ in 0..AGENT_RETRY_BUDGET {
            let text = self.generator.generate(&prompt.system, &prompt.user)?;
            match parse_sender_output(&text, ctx.config.max_claims)
                .and_then(|m| m.validate(ctx.config).map(|_| m))
            {
                Ok(m) => return Ok(m),
                Err(e) => {
                    log::warn!("sender {} malformed output: {e}", self.name);
                    last = e.to_string();
                }
            }
        }
        Err(Error::AgentProtocol {
            agent: self.name.clone(),
            reason: last,
        })
    }
}

pub struct RemoteReceiver {
    name: String,
    generator: Arc<dyn TextGenerator>,
    templates: PromptTemplates,
}

impl RemoteReceiver {
    pub fn new(name: &str, generator: Arc<dyn TextGenerator>) -> Self {
        Self {
            name: name.to_string(),
            generator,
            templates: PromptTemplates::default(),
        }
    }
}

impl ReceiverPolicy for RemoteReceiver {
    // The full transcript is resent on every step.
    fn step(&self, obs: &Observation<'_>) -> Result<ReceiverAction> {
        let prompt = self.templates.render_receiver(
            obs.public_spec,
            obs.message,
            obs.transcript,
            obs.remaining_budget,
            obs.playbook,
        )?;
        let mut last = String::new();
        for _ in 0..AGENT_RETRY_BUDGET {
            let text = self.generator.generate(&prompt.system, &prompt.user)?;
            match parse_receiver_output(&text, obs.config) {
                Ok(a) => return Ok(a),
                Err(e) => {
                    log::warn!("receiver {} malformed output: {e}", self.name);
                    last = e.to_string();
                }
            }
        }
        Err(Error::AgentProtocol {
            agent: self.name.clone(),
            reason: last,
        })
    }
}
