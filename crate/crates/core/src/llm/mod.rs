//! Chat-completion clients for paraphrase augmentation and zero-shot
//! violence annotation, plus deterministic offline stubs of both.

pub mod cache;
mod http;
mod paraphrase;
pub mod prompts;
pub mod rate;
pub mod retry;
mod stub;
mod zeroshot;

use serde::{Deserialize, Serialize};

pub use cache::ResponseCache;
pub use http::{HttpChatBackend, HttpConfig};
pub use paraphrase::{parse_variants, LlmParaphraser, Paraphraser};
pub use stub::{stub_rewrite, StubChatBackend, StubParaphraser};
pub use zeroshot::{parse_zero_shot, ZeroShotClassifier, ZeroShotResult};

use crate::error::{Error, Result};

pub const DEFAULT_ZERO_SHOT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_PARAPHRASE_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_text: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<()> {
        if self.system_prompt.trim().is_empty() || self.user_text.trim().is_empty() {
            return Err(Error::Validation("chat prompts must be non-empty".into()));
        }
        if self.model_name.trim().is_empty() {
            return Err(Error::Config("model name is not configured".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::Validation(format!(
                "temperature {} must be >= 0",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Anything that turns a chat request into the assistant's reply text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        (**self).complete(request)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        (**self).complete(request)
    }
}
