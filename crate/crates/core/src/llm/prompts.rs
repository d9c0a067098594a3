//! Versioned system prompts. The checksum of the exact prompt text is
//! stored with every cached response so that editing a prompt invalidates
//! earlier results instead of silently mixing them.

use crate::text::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub name: &'static str,
    pub version: u32,
    pub text: &'static str,
}

impl Prompt {
    pub fn checksum(&self) -> String {
        sha256_hex(format!("{}/v{}\n{}", self.name, self.version, self.text))
    }
}

pub const ZERO_SHOT: Prompt = Prompt {
    name: "zeroshot",
    version: 1,
    text: include_str!("../../resources/prompts/zeroshot_v1.txt"),
};

pub const PARAPHRASE: Prompt = Prompt {
    name: "paraphrase",
    version: 1,
    text: include_str!("../../resources/prompts/paraphrase_v1.txt"),
};

/// Variants produced by one paraphrase request.
pub const PARAPHRASES_PER_REQUEST: usize = 3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shot_prompt_carries_rules() {
        assert!(ZERO_SHOT
            .text
            .contains("Arrests of people and banishments are initially recorded"));
        assert!(ZERO_SHOT.text.contains("verbal violence (insults)"));
        assert!(ZERO_SHOT.text.contains("Respond with only [VIOLENT] or [NON-VIOLENT]"));
    }

    #[test]
    fn paraphrase_prompt_verbatim() {
        assert!(PARAPHRASE
            .text
            .starts_with("You are a historian that wants to paraphrase sentences"));
        assert!(PARAPHRASE
            .text
            .contains("Generate three different ways to rewrite the following sentence"));
        assert!(PARAPHRASE
            .text
            .contains("you are not allowed to change context, motive or consequences."));
    }

    #[test]
    fn checksums_differ() {
        assert_ne!(ZERO_SHOT.checksum(), PARAPHRASE.checksum());
        assert_eq!(ZERO_SHOT.checksum().len(), 64);
    }
}
