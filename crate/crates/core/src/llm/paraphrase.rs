use super::prompts::{PARAPHRASE, PARAPHRASES_PER_REQUEST};
use super::{ChatBackend, ChatRequest, DEFAULT_PARAPHRASE_TEMPERATURE};
use crate::error::{Error, Result};
use crate::text::{normalize, sha256_hex};

/// Produces label-preserving rewrites of a text.
pub trait Paraphraser: Send + Sync {
    /// Returns exactly `k` non-empty rewrites of `text`.
    fn paraphrase(&self, text: &str, k: usize) -> Result<Vec<String>>;

    /// Identifies the prompt (and backend flavour) behind the rewrites;
    /// used as part of the augmentation cache key.
    fn prompt_checksum(&self) -> String;
}

/// Paraphraser backed by a chat-completion service and the bundled
/// paraphrase prompt. Each request yields three variants; `k > 3` issues
/// further requests until `k` variants are collected.
pub struct LlmParaphraser<B> {
    backend: B,
    model_name: String,
    temperature: f64,
    max_retries: u32,
}

impl<B: ChatBackend> LlmParaphraser<B> {
    pub fn new(backend: B, model_name: impl Into<String>) -> Self {
        Self {
            backend,
            model_name: model_name.into(),
            temperature: DEFAULT_PARAPHRASE_TEMPERATURE,
            max_retries: 3,
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_max_retries(mut self, n: u32) -> Self {
        self.max_retries = n;
        self
    }
}

impl<B: ChatBackend> Paraphraser for LlmParaphraser<B> {
    fn paraphrase(&self, text: &str, k: usize) -> Result<Vec<String>> {
        let text = normalize(text);
        if text.is_empty() {
            return Err(Error::Validation("cannot paraphrase empty text".into()));
        }
        if k == 0 {
            return Err(Error::Validation("k must be >= 1".into()));
        }
        let req = ChatRequest {
            system_prompt: PARAPHRASE.text.to_string(),
            user_text: text,
            model_name: self.model_name.clone(),
            temperature: self.temperature,
            max_retries: self.max_retries,
        };
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let reply = self.backend.complete(&req)?;
            let want = (k - out.len()).min(PARAPHRASES_PER_REQUEST);
            let variants = parse_variants(&reply, PARAPHRASES_PER_REQUEST)?;
            out.extend(variants.into_iter().take(want));
        }
        Ok(out)
    }

    fn prompt_checksum(&self) -> String {
        sha256_hex(format!("{}:{}", self.model_name, PARAPHRASE.checksum()))
    }
}

fn strip_enumerator(line: &str) -> Option<&str> {
    let t = line.trim_start();
    for prefix in ["paraphrase", "rewrite", "version", "option"] {
        if t.len() > prefix.len() && t[..prefix.len()].eq_ignore_ascii_case(prefix) {
            let rest = t[prefix.len()..].trim_start();
            let digits = rest.chars().take_while(char::is_ascii_digit).count();
            if digits > 0 {
                return Some(rest[digits..].trim_start_matches([':', '.', ')', '-', ' ']));
            }
        }
    }
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 && digits <= 2 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix(['.', ')', ':']) {
            return Some(r.trim_start());
        }
    }
    if let Some(r) = t.strip_prefix(['-', '*', '•']) {
        return Some(r.trim_start());
    }
    None
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    let pairs = [('"', '"'), ('“', '”'), ('\'', '\'')];
    for (open, close) in pairs {
        if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
            return &s[open.len_utf8()..s.len() - close.len_utf8()];
        }
    }
    s
}

/// Splits a model reply into at least `k` rewrites.
///
/// Enumerated replies (`1.`, `2)`, `Paraphrase 3:`, bullets) are grouped by
/// item, continuation lines joining the preceding item and any preamble
/// dropped. Replies without enumeration fall back to one rewrite per
/// non-empty line. Fewer than `k` items is a format error.
pub fn parse_variants(reply: &str, k: usize) -> Result<Vec<String>> {
    let lines: Vec<&str> = reply.lines().filter(|l| !l.trim().is_empty()).collect();
    let enumerated = lines.iter().any(|l| strip_enumerator(l).is_some());
    let mut items: Vec<String> = Vec::new();
    if enumerated {
        let mut started = false;
        for l in lines {
            match strip_enumerator(l) {
                Some(rest) => {
                    started = true;
                    items.push(rest.to_string());
                }
                None if started => {
                    let last = items.last_mut().expect("started implies an item");
                    last.push(' ');
                    last.push_str(l.trim());
                }
                None => {}
            }
        }
    } else {
        items = lines.into_iter().map(str::to_string).collect();
    }
    let items: Vec<String> = items
        .iter()
        .map(|s| normalize(unquote(s)))
        .filter(|s| !s.is_empty())
        .collect();
    if items.len() < k {
        return Err(Error::Format(format!(
            "expected {k} paraphrases, parsed {}",
            items.len()
        )));
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::StubChatBackend;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn numbered_reply() {
        let r = "Here are three versions:\n1. First one.\n2) Second\n   continues here.\n3: \"Third.\"";
        let v = parse_variants(r, 3).unwrap();
        assert_eq!(v, ["First one.", "Second continues here.", "Third."]);
    }

    #[test]
    fn labelled_reply() {
        let r = "Paraphrase 1: A.\nParaphrase 2: B.\nParaphrase 3: C.";
        assert_eq!(parse_variants(r, 3).unwrap(), ["A.", "B.", "C."]);
    }

    #[test]
    fn plain_lines_reply() {
        assert_eq!(parse_variants("A\n\nB\nC\n", 3).unwrap(), ["A", "B", "C"]);
    }

    #[test]
    fn too_few_is_format_error() {
        assert!(matches!(parse_variants("1. only one", 3), Err(Error::Format(_))));
        assert!(matches!(parse_variants("", 1), Err(Error::Format(_))));
    }

    #[test]
    fn numbers_inside_sentences_are_not_enumerators() {
        let r = "300 Spartans held the pass.\nThe pass was held by 300 Spartans.\nThree hundred held it.";
        assert_eq!(parse_variants(r, 3).unwrap().len(), 3);
    }

    struct Counting(AtomicUsize);

    impl ChatBackend for Counting {
        fn complete(&self, req: &ChatRequest) -> Result<String> {
            self.0.fetch_add(1, Ordering::SeqCst);
            StubChatBackend.complete(req)
        }
    }

    #[test]
    fn more_than_three_issues_more_requests() {
        let p = LlmParaphraser::new(Counting(AtomicUsize::new(0)), "m");
        let out = p.paraphrase("The king was slain, and the city fell.", 5).unwrap();
        assert_eq!(out.len(), 5);
        assert_eq!(p.backend.0.load(Ordering::SeqCst), 2);
        let out = p.paraphrase("The king was slain.", 3).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(p.backend.0.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn preconditions() {
        let p = LlmParaphraser::new(StubChatBackend, "m");
        assert!(matches!(p.paraphrase(" ", 3), Err(Error::Validation(_))));
        assert!(matches!(p.paraphrase("x", 0), Err(Error::Validation(_))));
    }
}
