//! Offline stand-ins for the chat service. Both are pure functions of their
//! inputs, so whole pipeline runs are reproducible without network access.

use super::paraphrase::Paraphraser;
use super::prompts::{PARAPHRASE, PARAPHRASES_PER_REQUEST, ZERO_SHOT};
use super::{ChatBackend, ChatRequest};
use crate::error::{Error, Result};
use crate::text::{normalize, sha256_hex};

const SYNONYMS: &[(&str, &str)] = &[
    ("killed", "slew"),
    ("slew", "killed"),
    ("slain", "killed"),
    ("murdered", "assassinated"),
    ("stabbed", "pierced"),
    ("wounded", "injured"),
    ("struck", "smote"),
    ("spear", "lance"),
    ("sword", "blade"),
    ("battle", "engagement"),
    ("fought", "contended"),
    ("attacked", "assailed"),
    ("city", "town"),
    ("said", "declared"),
    ("people", "populace"),
    ("men", "soldiers"),
    ("great", "mighty"),
    ("afterwards", "later"),
    ("quickly", "swiftly"),
    ("house", "dwelling"),
    ("friends", "companions"),
    ("enemy", "foe"),
    ("enemies", "foes"),
    ("began", "started"),
    ("large", "considerable"),
];

const LOWERABLE: &[&str] = &[
    "the", "and", "as", "in", "a", "an", "but", "then", "when", "after", "so", "at", "with",
    "on", "for", "this", "these", "he", "she", "they", "it", "his", "her", "there", "now", "of",
];

const VIOLENT_STEMS: &[&str] = &[
    "kill", "slew", "slain", "slaughter", "murder", "stab", "wound", "spear", "sword", "blood",
    "battle", "smote", "struck", "assassin", "behead", "execut", "tortur", "massacre", "pierc",
    "ran him through", "put to death", "fell upon",
];

fn lower_first(s: &str) -> String {
    let first = s.split_whitespace().next().unwrap_or("");
    let bare = first.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
    if LOWERABLE.contains(&bare.as_str()) {
        let mut cs = s.chars();
        match cs.next() {
            Some(c) => c.to_lowercase().chain(cs).collect(),
            None => String::new(),
        }
    } else {
        s.to_string()
    }
}

fn upper_first(s: &str) -> String {
    let mut cs = s.chars();
    match cs.next() {
        Some(c) => c.to_uppercase().chain(cs).collect(),
        None => String::new(),
    }
}

fn substitute(text: &str) -> String {
    text.split(' ')
        .map(|tok| {
            let start = tok.find(|c: char| c.is_alphanumeric()).unwrap_or(tok.len());
            let end = tok
                .rfind(|c: char| c.is_alphanumeric())
                .map_or(start, |i| i + tok[i..].chars().next().map_or(1, char::len_utf8));
            let core = &tok[start..end];
            let lower = core.to_lowercase();
            match SYNONYMS.iter().find(|(w, _)| *w == lower) {
                Some((_, rep)) => {
                    let rep = if core.chars().next().is_some_and(char::is_uppercase) {
                        upper_first(rep)
                    } else {
                        (*rep).to_string()
                    };
                    format!("{}{}{}", &tok[..start], rep, &tok[end..])
                }
                None => tok.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn rotate_clauses(text: &str) -> Option<String> {
    let (a, b) = text.split_once(", ")?;
    let b = b.trim_end_matches(['.', '!', ';']);
    if a.trim().is_empty() || b.trim().is_empty() {
        return None;
    }
    Some(format!("{}, {}.", upper_first(b), lower_first(a)))
}

fn reverse_sentences(text: &str) -> String {
    let sentences: Vec<&str> = text
        .split_inclusive(['.', '!', '?'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if sentences.len() < 2 {
        return text.to_string();
    }
    sentences.into_iter().rev().collect::<Vec<_>>().join(" ")
}

/// The `index`-th (1-based) deterministic rewrite of `text`.
///
/// Rewrites cycle through clause rotation, synonym substitution and
/// sentence reordering; each carries a distinct framing phrase so that no
/// rewrite ever equals the input after normalization.
pub fn stub_rewrite(text: &str, index: usize) -> String {
    let text = normalize(text);
    let round = (index.max(1) - 1) / PARAPHRASES_PER_REQUEST;
    let body = match (index.max(1) - 1) % PARAPHRASES_PER_REQUEST {
        0 => match rotate_clauses(&text) {
            Some(r) => format!("In other words: {r}"),
            None => format!("In other words, {}", lower_first(&text)),
        },
        1 => format!("It is said that {}", lower_first(&substitute(&text))),
        _ => format!("According to the account, {}", lower_first(&reverse_sentences(&text))),
    };
    if round == 0 {
        body
    } else {
        format!("Retold once more ({}): {body}", round + 1)
    }
}

/// Template paraphraser with no external calls.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubParaphraser;

impl Paraphraser for StubParaphraser {
    fn paraphrase(&self, text: &str, k: usize) -> Result<Vec<String>> {
        if normalize(text).is_empty() {
            return Err(Error::Validation("cannot paraphrase empty text".into()));
        }
        if k == 0 {
            return Err(Error::Validation("k must be >= 1".into()));
        }
        Ok((1..=k).map(|i| stub_rewrite(text, i)).collect())
    }

    fn prompt_checksum(&self) -> String {
        sha256_hex(format!("stub-v1:{}", PARAPHRASE.checksum()))
    }
}

/// Deterministic chat backend that understands the two bundled prompts:
/// paraphrase requests get a numbered list of stub rewrites, zero-shot
/// requests a bracketed label from a keyword lexicon.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubChatBackend;

impl StubChatBackend {
    pub fn looks_violent(text: &str) -> bool {
        // Stems match at word starts only, so "established" is not "stab".
        let lower = format!(" {}", text.to_lowercase().replace(|c: char| !c.is_alphanumeric(), " "));
        VIOLENT_STEMS.iter().any(|s| lower.contains(&format!(" {s}")))
    }
}

impl ChatBackend for StubChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        request.validate()?;
        if request.system_prompt == PARAPHRASE.text {
            let lines: Vec<String> = (1..=PARAPHRASES_PER_REQUEST)
                .map(|i| format!("{i}. {}", stub_rewrite(&request.user_text, i)))
                .collect();
            Ok(lines.join("\n"))
        } else if request.system_prompt == ZERO_SHOT.text {
            Ok(if Self::looks_violent(&request.user_text) {
                "[VIOLENT]".into()
            } else {
                "[NON-VIOLENT]".into()
            })
        } else {
            Err(Error::Client("stub backend only serves the bundled prompts".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TISAPHERNES: &str = "As a result of this battle, the Greeks could not only harry the country of the King without fear, but had the satisfaction of seeing due punishment inflicted upon Tisaphernes, an abominable man, and most hateful to the Greek race.";

    #[test]
    fn three_distinct_rewrites() {
        let out = StubParaphraser.paraphrase(TISAPHERNES, 3).unwrap();
        assert_eq!(out.len(), 3);
        for p in &out {
            assert!(!p.is_empty());
            assert_ne!(normalize(p), normalize(TISAPHERNES));
            assert!(p.contains("Tisaphernes"));
        }
        assert_ne!(out[0], out[1]);
        assert_ne!(out[1], out[2]);
        assert!(out[1].contains("engagement"));
    }

    #[test]
    fn rewrites_are_pure() {
        let a = StubParaphraser.paraphrase(TISAPHERNES, 5).unwrap();
        let b = StubParaphraser.paraphrase(TISAPHERNES, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[3], a[0]);
    }

    #[test]
    fn short_text_still_differs() {
        for t in ["War.", "x", "He died"] {
            for i in 1..=6 {
                assert_ne!(normalize(&stub_rewrite(t, i)), normalize(t));
            }
        }
    }

    #[test]
    fn empty_text_rejected() {
        assert!(matches!(StubParaphraser.paraphrase("  ", 3), Err(Error::Validation(_))));
    }

    #[test]
    fn substitution_keeps_punctuation_and_case() {
        assert_eq!(substitute("Killed, the enemy."), "Slew, the foe.");
    }
}
