use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::debug;

use super::rate::TokenBucket;
use super::retry::{with_retry, Attempt, RetryPolicy};
use super::{ChatBackend, ChatRequest};
use crate::error::{Error, Result};

/// Provider-agnostic settings for an OpenAI-style `/chat/completions` API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub base_url: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub requests_per_minute: f64,
    pub burst: u32,
    pub timeout_secs: u64,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "POLEMOS_LLM_API_KEY".into(),
            requests_per_minute: 500.0,
            burst: 10,
            timeout_secs: 60,
            base_delay_ms: 500,
            max_delay_ms: 20_000,
        }
    }
}

pub struct HttpChatBackend {
    config: HttpConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    limiter: TokenBucket,
}

impl HttpChatBackend {
    /// Reads the API key from the configured environment variable, if set.
    pub fn from_env(config: HttpConfig) -> Result<Self> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::new(config, api_key)
    }

    pub fn new(config: HttpConfig, api_key: Option<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Client(e.to_string()))?;
        let limiter = TokenBucket::new(config.requests_per_minute, config.burst);
        Ok(Self {
            config,
            api_key,
            client,
            limiter,
        })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt<String, Error> {
        self.limiter.acquire();
        let mut req = self.client.post(self.url()).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(Error::Client(format!("transport: {e}"))),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Transient(Error::Client(format!("reading body: {e}"))),
        };
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Transient(Error::Client(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Attempt::Fatal(Error::Client(format!("HTTP {status}: {text}")));
        }
        match extract_content(&text) {
            Ok(c) => Attempt::Done(c),
            Err(e) => Attempt::Fatal(e),
        }
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

fn extract_content(body: &str) -> Result<String> {
    let parsed: CompletionResponse = serde_json::from_str(body)
        .map_err(|e| Error::Format(format!("chat completion body: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| Error::Format("chat completion without content".into()))
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        request.validate()?;
        let body = json!({
            "model": request.model_name,
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_text},
            ],
        });
        let policy = RetryPolicy {
            max_retries: request.max_retries,
            base_delay: Duration::from_millis(self.config.base_delay_ms),
            max_delay: Duration::from_millis(self.config.max_delay_ms),
        };
        debug!(model = %request.model_name, "chat completion request");
        with_retry(&policy, |_| self.attempt(&body))
    }
}
