//! Training configuration and backbone tiers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Backbone id of the small encoder tier built into this crate.
pub const SMALL_BACKBONE: &str = "hashed-ngram-small";

/// Backbone ids of the full-size encoder tier. They are accepted in
/// configuration so runs can name them, but this build has no runtime for
/// them.
pub const FULL_BACKBONES: &[&str] = &[
    "bert-large-cased",
    "bert-large-uncased",
    "roberta-large",
    "bert-base-cased",
    "roberta-base",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Small,
    Full,
}

/// Maps a backbone id to its tier; unknown ids are rejected.
pub fn backbone_tier(id: &str) -> Result<Tier> {
    if id == SMALL_BACKBONE {
        Ok(Tier::Small)
    } else if FULL_BACKBONES.contains(&id) {
        Ok(Tier::Full)
    } else {
        Err(Error::Config(format!(
            "unknown backbone {id:?}; known: {SMALL_BACKBONE}, {}",
            FULL_BACKBONES.join(", ")
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub backbone: String,
    /// Longer inputs are truncated to this many tokens and flagged.
    pub max_sequence_length: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Share of the training examples held out for validation
    /// (categorization only).
    pub validation_fraction: f64,
    /// Weight the loss by inverse class frequency.
    pub class_weighting: bool,
    /// Width of the pooled text representation.
    pub embedding_dim: usize,
    /// Number of hash buckets for n-gram features.
    pub buckets: u32,
}

impl TrainConfig {
    /// Defaults for the full-size encoder tier.
    pub fn full_tier() -> Self {
        Self {
            backbone: FULL_BACKBONES[0].into(),
            epochs: 3,
            learning_rate: 2e-5,
            batch_size: 16,
            ..Self::small_tier()
        }
    }

    /// Defaults for the small encoder tier. A bag-of-n-grams encoder
    /// trained from scratch needs far larger steps than fine-tuning a
    /// pretrained transformer.
    pub fn small_tier() -> Self {
        Self {
            backbone: SMALL_BACKBONE.into(),
            max_sequence_length: 512,
            epochs: 20,
            learning_rate: 4.0,
            batch_size: 16,
            seed: 13,
            validation_fraction: 0.1,
            class_weighting: false,
            embedding_dim: 32,
            buckets: 1 << 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.max_sequence_length == 0 {
            return bad("max_sequence_length must be positive".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!(
                "validation_fraction {} outside [0, 1)",
                self.validation_fraction
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.embedding_dim == 0 || self.buckets == 0 {
            return bad("embedding_dim and buckets must be positive".into());
        }
        match backbone_tier(&self.backbone)? {
            Tier::Small => Ok(()),
            Tier::Full => bad(format!(
                "backbone {:?} belongs to the full-size encoder tier, which is not available in this build; use {SMALL_BACKBONE}",
                self.backbone
            )),
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::small_tier()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
        let full = TrainConfig::full_tier();
        assert_eq!((full.epochs, full.learning_rate, full.batch_size), (3, 2e-5, 16));
        assert!(matches!(full.validate(), Err(Error::Config(m)) if m.contains("not available")));
    }

    #[test]
    fn invariants() {
        for bad in [
            TrainConfig { max_sequence_length: 0, ..Default::default() },
            TrainConfig { validation_fraction: 1.0, ..Default::default() },
            TrainConfig { validation_fraction: -0.1, ..Default::default() },
            TrainConfig { backbone: "gpt2".into(), ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn toml_like_partial() {
        let c: TrainConfig = serde_json::from_str(r#"{"epochs": 4}"#).unwrap();
        assert_eq!(c.epochs, 4);
        assert_eq!(c.backbone, SMALL_BACKBONE);
    }
}
