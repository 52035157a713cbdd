//! Chat-completion client with retry and exponential backoff.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::InferError;

fn default_temperature() -> f64 {
    0.0
}
fn default_max_output_tokens() -> u32 {
    1024
}
fn default_timeout_secs() -> u64 {
    60
}
fn default_max_retries() -> u32 {
    3
}
fn default_concurrency() -> usize {
    4
}
fn default_backoff_base_ms() -> u64 {
    1000
}

/// Where and how to reach the extraction model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_backoff_base_ms")]
    pub backoff_base_ms: u64,
    /// Send instruction and input as separate system and user messages.
    #[serde(default)]
    pub split_messages: bool,
    /// Append `# record_id: <id>` to each user message. For mock endpoints only.
    #[serde(default)]
    pub tag_record_ids: bool,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model_name: model_name.into(),
            temperature: default_temperature(),
            max_output_tokens: default_max_output_tokens(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            concurrency: default_concurrency(),
            auth_env: None,
            backoff_base_ms: default_backoff_base_ms(),
            split_messages: false,
            tag_record_ids: false,
        }
    }

    pub fn validate(&self) -> Result<(), InferError> {
        if self.concurrency == 0 {
            return Err(InferError::InvalidConfig("concurrency must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(InferError::InvalidConfig("temperature must be a finite value >= 0".into()));
        }
        if self.base_url.trim().is_empty() {
            return Err(InferError::InvalidConfig("base_url is empty".into()));
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

/// Suffix used to tag requests with their record id.
pub const RECORD_ID_TAG: &str = "# record_id: ";

/// Parse the record id tag from the last line of a user message.
pub fn extract_record_id(content: &str) -> Option<&str> {
    let last = content.rsplit('\n').next()?;
    last.strip_prefix(RECORD_ID_TAG).map(str::trim)
}

/// Successful completion plus the number of HTTP attempts it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub content: String,
    pub attempts: u32,
    pub latency: Duration,
}

/// Reusable client for one endpoint.
#[derive(Debug, Clone)]
pub struct ChatClient {
    endpoint: EndpointConfig,
    http: reqwest::Client,
    token: Option<String>,
}

impl ChatClient {
    pub fn new(endpoint: EndpointConfig) -> Result<Self, InferError> {
        endpoint.validate()?;
        let token = match &endpoint.auth_env {
            Some(var) => Some(std::env::var(var).map_err(|_| InferError::MissingToken(var.clone()))?),
            None => None,
        };
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| InferError::InvalidConfig(e.to_string()))?;
        Ok(ChatClient { endpoint, http, token })
    }

    pub fn endpoint(&self) -> &EndpointConfig {
        &self.endpoint
    }

    /// Request body for one record. Used for the request digest as well.
    pub fn request_body(&self, instruction: &str, input: &str, record_id: Option<&str>) -> Value {
        let tag = match (self.endpoint.tag_record_ids, record_id) {
            (true, Some(id)) => format!("\n{RECORD_ID_TAG}{id}"),
            _ => String::new(),
        };
        let messages = if self.endpoint.split_messages {
            json!([
                {"role": "system", "content": instruction},
                {"role": "user", "content": format!("{input}{tag}")},
            ])
        } else {
            json!([{"role": "user", "content": format!("{instruction}\n{input}{tag}")}])
        };
        json!({
            "model": self.endpoint.model_name,
            "messages": messages,
            "temperature": self.endpoint.temperature,
            "max_tokens": self.endpoint.max_output_tokens,
        })
    }

    pub async fn complete(&self, instruction: &str, input: &str) -> Result<Completion, InferError> {
        self.send(&self.request_body(instruction, input, None)).await
    }

    pub async fn send(&self, body: &Value) -> Result<Completion, InferError> {
        let url = self.endpoint.completions_url();
        let started = Instant::now();
        let mut attempt = 0;
        loop {
            attempt += 1;
            let outcome = self.attempt(&url, body).await;
            let retryable = match &outcome {
                Ok(_) => false,
                Err(Failure::Status(s, _)) => *s == 429 || (500..600).contains(s),
                Err(Failure::Transport(_) | Failure::Timeout) => true,
                Err(Failure::Malformed(_)) => false,
            };
            if retryable && attempt <= self.endpoint.max_retries {
                let delay = backoff_delay(self.endpoint.backoff_base_ms, attempt);
                log::debug!("attempt {attempt} failed, retrying in {delay:?}");
                tokio::time::sleep(delay).await;
                continue;
            }
            return match outcome {
                Ok(content) => Ok(Completion {
                    content,
                    attempts: attempt,
                    latency: started.elapsed(),
                }),
                Err(Failure::Status(status, detail)) => Err(InferError::Endpoint {
                    status: Some(status),
                    attempts: attempt,
                    detail,
                }),
                Err(Failure::Transport(detail)) => Err(InferError::Endpoint {
                    status: None,
                    attempts: attempt,
                    detail,
                }),
                Err(Failure::Malformed(detail)) => Err(InferError::MalformedResponse(detail)),
                Err(Failure::Timeout) => Err(InferError::Timeout { attempts: attempt }),
            };
        }
    }

    async fn attempt(&self, url: &str, body: &Value) -> Result<String, Failure> {
        let mut req = self.http.post(url).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().await.map_err(Failure::from_reqwest)?;
        let status = resp.status().as_u16();
        if !resp.status().is_success() {
            let detail = resp.text().await.unwrap_or_default();
            return Err(Failure::Status(status, detail));
        }
        let value: Value = resp.json().await.map_err(|e| {
            if e.is_timeout() {
                Failure::Timeout
            } else {
                Failure::Malformed(e.to_string())
            }
        })?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Failure::Malformed("missing choices[0].message.content".into()))
    }
}

enum Failure {
    Status(u16, String),
    Transport(String),
    Timeout,
    Malformed(String),
}

impl Failure {
    fn from_reqwest(e: reqwest::Error) -> Self {
        if e.is_timeout() {
            Failure::Timeout
        } else {
            Failure::Transport(e.to_string())
        }
    }
}

/// `base * 2^(attempt-1)`, with the upper half jittered.
pub fn backoff_delay(base_ms: u64, attempt: u32) -> Duration {
    let full = base_ms.saturating_mul(1u64 << (attempt - 1).min(16));
    let half = full / 2;
    let jitter = if half > 0 { rand::rng().random_range(0..=half) } else { 0 };
    Duration::from_millis(full - half + jitter)
}

/// One-shot convenience wrapper around [`ChatClient`].
pub async fn chat_complete(endpoint: &EndpointConfig, instruction: &str, input: &str) -> Result<String, InferError> {
    let client = ChatClient::new(endpoint.clone())?;
    Ok(client.complete(instruction, input).await?.content)
}
