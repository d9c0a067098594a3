use serde::{Deserialize, Serialize};
use tracing::warn;

use super::prompts::ZERO_SHOT;
use super::{ChatBackend, ChatRequest, DEFAULT_ZERO_SHOT_TEMPERATURE};
use crate::dataset::registry::{NONVIOLENT, VIOLENT};
use crate::error::{Error, Result};
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroShotResult {
    pub raw_response: String,
    /// Parsed label; `None` when the reply did not carry exactly one
    /// kind of bracketed token.
    pub label: Option<String>,
    pub parse_ok: bool,
}

impl ZeroShotResult {
    /// Label to use downstream: unparseable replies count as non-violent.
    pub fn effective_label(&self) -> &str {
        self.label.as_deref().unwrap_or(NONVIOLENT)
    }
}

/// Extracts `[VIOLENT]` / `[NON-VIOLENT]` from a reply.
///
/// Matching is case-insensitive and ignores spaces, hyphens and
/// underscores inside the brackets. The reply parses when tokens of exactly
/// one kind occur; both kinds or neither leave `parse_ok` false.
pub fn parse_zero_shot(raw: &str) -> ZeroShotResult {
    let mut violent = false;
    let mut nonviolent = false;
    let mut rest = raw;
    while let Some(open) = rest.find('[') {
        let after = &rest[open + 1..];
        let Some(close) = after.find(']') else { break };
        let inner: String = after[..close]
            .chars()
            .filter(|c| !matches!(c, ' ' | '-' | '_' | '\u{2010}' | '\u{2011}'))
            .flat_map(char::to_uppercase)
            .collect();
        match inner.as_str() {
            "VIOLENT" => violent = true,
            "NONVIOLENT" => nonviolent = true,
            _ => {}
        }
        rest = &after[close + 1..];
    }
    let label = match (violent, nonviolent) {
        (true, false) => Some(VIOLENT.to_string()),
        (false, true) => Some(NONVIOLENT.to_string()),
        _ => None,
    };
    ZeroShotResult {
        raw_response: raw.to_string(),
        parse_ok: label.is_some(),
        label,
    }
}

/// Simulated annotator: one chat request per passage with the bundled
/// zero-shot prompt.
pub struct ZeroShotClassifier<B> {
    backend: B,
    model_name: String,
    temperature: f64,
    max_retries: u32,
}

impl<B: ChatBackend> ZeroShotClassifier<B> {
    pub fn new(backend: B, model_name: impl Into<String>) -> Self {
        Self {
            backend,
            model_name: model_name.into(),
            temperature: DEFAULT_ZERO_SHOT_TEMPERATURE,
            max_retries: 3,
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn classify(&self, text: &str) -> Result<ZeroShotResult> {
        let text = normalize(text);
        if text.is_empty() {
            return Err(Error::Validation("cannot classify empty text".into()));
        }
        let reply = self.backend.complete(&ChatRequest {
            system_prompt: ZERO_SHOT.text.to_string(),
            user_text: text,
            model_name: self.model_name.clone(),
            temperature: self.temperature,
            max_retries: self.max_retries,
        })?;
        let result = parse_zero_shot(&reply);
        if !result.parse_ok {
            warn!(response = %reply, "ambiguous zero-shot reply, counted as non-violent");
        }
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::StubChatBackend;

    #[test]
    fn contract_examples() {
        let r = parse_zero_shot("[VIOLENT]");
        assert!(r.parse_ok);
        assert_eq!(r.label.as_deref(), Some("violent"));

        let r = parse_zero_shot("[non-violent]");
        assert_eq!(r.label.as_deref(), Some("nonviolent"));

        let r = parse_zero_shot("It seems violent.");
        assert!(!r.parse_ok);
        assert_eq!(r.raw_response, "It seems violent.");
        assert_eq!(r.effective_label(), "nonviolent");
    }

    #[test]
    fn both_tokens_ambiguous() {
        assert!(!parse_zero_shot("[VIOLENT] or [NON-VIOLENT]").parse_ok);
    }

    #[test]
    fn stub_classifier() {
        let c = ZeroShotClassifier::new(StubChatBackend, "stub");
        let r = c
            .classify("And so, at last, Alexander seized a spear from one of his guards, met Cleitus as he was drawing aside the curtain before the door, and ran him through.")
            .unwrap();
        assert_eq!(r.label.as_deref(), Some("violent"));
        let r = c.classify("Numa established the calendar of festivals.").unwrap();
        assert_eq!(r.label.as_deref(), Some("nonviolent"));
        assert!(c.classify("").is_err());
    }
}
