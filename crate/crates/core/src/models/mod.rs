//! Classifiers for violence detection and the categorization dimensions.
//!
//! The backbone is pluggable by id. This build ships the small encoder
//! tier: hashed word uni- and bigrams, mean-pooled into a dense vector and
//! fed to a softmax head, trained from scratch. Full-size encoder ids are
//! recognised in configuration but rejected at training time.

mod config;
mod features;
mod handle;
mod network;

pub use config::{backbone_tier, Tier, TrainConfig, FULL_BACKBONES, SMALL_BACKBONE};
pub use features::{featurize, tokenize, Featurized};
pub use handle::{
    as_is_model, predict, predict_category, predict_violence, train_categorizer, train_detector,
    ModelHandle, ModelMeta, Scored, Variant, DEFAULT_THRESHOLD,
};
