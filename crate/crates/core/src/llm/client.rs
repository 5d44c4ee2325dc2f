//! Chat-completion clients: a scripted client for tests and offline runs, an
//! HTTP client for OpenAI-compatible endpoints, and retry handling.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::template::{sha256_hex, Stage};
use crate::error::{Error, Result};

pub const ENDPOINT_ENV: &str = "EVALFILTER_LLM_ENDPOINT";
pub const API_KEY_ENV: &str = "EVALFILTER_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    /// Sentence id the prompt belongs to.
    pub id: String,
    pub stage: Stage,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    /// Worth retrying: network failure, timeout, rate limit, server error.
    #[error("transport error: {0}")]
    Transport(String),
    /// Not worth retrying.
    #[error("request rejected: {0}")]
    Rejected(String),
}

/// A chat-completion backend. Implementations must tolerate concurrent
/// calls.
pub trait ChatClient: Send + Sync {
    fn model_name(&self) -> &str;
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, ClientError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Retries after the first attempt for transport errors.
    pub max_retries: u32,
    /// Delay before the first retry; doubled for each further retry.
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay_ms: 500,
        }
    }
}

/// Calls `client`, retrying transport errors with exponential backoff.
pub fn complete_with_retry(client: &dyn ChatClient, request: &ChatRequest, policy: RetryPolicy) -> Result<String> {
    let mut attempt = 0;
    loop {
        match client.complete(request) {
            Ok(text) => return Ok(text),
            Err(ClientError::Transport(msg)) if attempt < policy.max_retries => {
                let delay = policy.base_delay_ms.saturating_mul(1 << attempt.min(16));
                log::warn!(
                    "{} {}: {msg}; retry {}/{} in {delay} ms",
                    request.id,
                    request.stage,
                    attempt + 1,
                    policy.max_retries
                );
                std::thread::sleep(Duration::from_millis(delay));
                attempt += 1;
            }
            Err(e) => {
                return Err(Error::Client(format!(
                    "{} {} failed after {} attempt(s): {e}",
                    request.id,
                    request.stage,
                    attempt + 1
                )))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Scripted client

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedResponse {
    One(String),
    /// Successive calls with the same key get successive entries; the last
    /// one repeats.
    Sequence(Vec<String>),
}

/// Fixture file layout for [`ScriptedClient`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptFile {
    #[serde(default = "default_mock_model")]
    pub model: String,
    /// Keyed by the sha256 hex digest of the prompt, or by `"{id}:{stage}"`
    /// with stage one of `stage1`, `stage2`, `restricted`.
    pub responses: HashMap<String, ScriptedResponse>,
}

fn default_mock_model() -> String {
    "scripted".into()
}

/// Replays canned responses. Records every request it receives.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    script: ScriptFile,
    cursor: Mutex<HashMap<String, usize>>,
    log: Mutex<Vec<ChatRequest>>,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

impl ScriptedClient {
    pub fn new(script: ScriptFile) -> Self {
        ScriptedClient {
            script,
            ..ScriptedClient::default()
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let script: ScriptFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })?;
        Ok(ScriptedClient::new(script))
    }

    /// Adds a response for `"{id}:{stage}"`.
    pub fn with_response(mut self, id: &str, stage: Stage, response: impl Into<String>) -> Self {
        self.script
            .responses
            .insert(format!("{id}:{stage}"), ScriptedResponse::One(response.into()));
        self
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().expect("request log poisoned").clone()
    }

    /// Largest number of calls observed in progress at once.
    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    fn lookup(&self, request: &ChatRequest) -> Option<String> {
        let digest = sha256_hex(&request.prompt);
        let by_id = format!("{}:{}", request.id, request.stage);
        let (key, entry) = [digest, by_id]
            .into_iter()
            .find_map(|k| self.script.responses.get(&k).map(|e| (k, e)))?;
        match entry {
            ScriptedResponse::One(text) => Some(text.clone()),
            ScriptedResponse::Sequence(texts) => {
                let mut cursor = self.cursor.lock().expect("cursor poisoned");
                let i = cursor.entry(key).or_insert(0);
                let text = texts.get(*i).or(texts.last()).cloned();
                *i += 1;
                text
            }
        }
    }
}

impl ChatClient for ScriptedClient {
    fn model_name(&self) -> &str {
        &self.script.model
    }

    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, ClientError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        self.log.lock().expect("request log poisoned").push(request.clone());
        let out = self.lookup(request).ok_or_else(|| {
            ClientError::Rejected(format!("no scripted response for {}:{}", request.id, request.stage))
        });
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        out
    }
}

/// A client backed by a closure, for simulated LLMs.
pub struct FnClient<F> {
    name: String,
    f: F,
}

impl<F> FnClient<F>
where
    F: Fn(&ChatRequest) -> std::result::Result<String, ClientError> + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnClient { name: name.into(), f }
    }
}

impl<F> ChatClient for FnClient<F>
where
    F: Fn(&ChatRequest) -> std::result::Result<String, ClientError> + Send + Sync,
{
    fn model_name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, ClientError> {
        (self.f)(request)
    }
}

// ---------------------------------------------------------------------------
// HTTP client

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpClientConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub api_key: String,
    pub model: String,
    pub timeout_secs: u64,
    pub temperature: f64,
}

impl HttpClientConfig {
    /// Reads endpoint and credential from the environment.
    pub fn from_env(model: &str, timeout_secs: u64) -> Result<Self> {
        let get = |var: &str| {
            std::env::var(var)
                .ok()
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| Error::Config(format!("environment variable {var} is not set")))
        };
        Ok(HttpClientConfig {
            endpoint: get(ENDPOINT_ENV)?,
            api_key: get(API_KEY_ENV)?,
            model: model.to_string(),
            timeout_secs,
            temperature: 0.0,
        })
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpChatClient {
    config: HttpClientConfig,
    agent: ureq::Agent,
}

impl HttpChatClient {
    pub fn new(config: HttpClientConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build();
        HttpChatClient { config, agent }
    }
}

impl ChatClient for HttpChatClient {
    fn model_name(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, ClientError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let response = self
            .agent
            .post(&self.config.endpoint)
            .set("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(body);
        let value: serde_json::Value = match response {
            Ok(r) => r
                .into_json()
                .map_err(|e| ClientError::Transport(format!("reading response: {e}")))?,
            Err(ureq::Error::Status(code, r)) => {
                let detail = r.into_string().unwrap_or_default();
                let msg = format!("HTTP {code}: {detail}");
                return Err(if code == 429 || code >= 500 {
                    ClientError::Transport(msg)
                } else {
                    ClientError::Rejected(msg)
                });
            }
            Err(e) => return Err(ClientError::Transport(e.to_string())),
        };
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ClientError::Rejected("response has no choices[0].message.content".into()))
    }
}
