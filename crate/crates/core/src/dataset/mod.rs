//! Label registries, train/test splits and paraphrase augmentation.

pub mod augment;
pub mod example;
pub mod registry;
pub mod split;

pub use augment::{augment, AugmentFailure, AugmentOptions, AugmentOutcome};
pub use example::{DatasetRecord, DatasetSplit, LabeledExample, Provenance, SplitName, SplitStats};
pub use registry::{LabelInfo, LabelRegistry, Registries, Task, NONVIOLENT, VIOLENT};
pub use split::{make_categorization_split, make_detection_split, DetectionSplitConfig, DEFAULT_SEED};
