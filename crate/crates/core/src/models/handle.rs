//! Trained model handles: training entry points, inference and artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::info;

use super::config::TrainConfig;
use super::features::featurize;
use super::network::{Network, Sample};
use crate::dataset::{LabelRegistry, LabeledExample, Registries, Task, VIOLENT};
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::store::jsonl::write_atomic;
use crate::store::{Passage, Prediction};
use crate::text::sha256_hex;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
const FORMAT_VERSION: u32 = 1;

/// How a model came to be, named as in the result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    AsIs,
    FineTuned,
    FineTunedAugmented,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::AsIs => "as-is",
            Variant::FineTuned => "fine-tuned",
            Variant::FineTunedAugmented => "fine-tuned and augmented",
        })
    }
}

impl Variant {
    fn slug(self) -> &'static str {
        match self {
            Variant::AsIs => "asis",
            Variant::FineTuned => "ft",
            Variant::FineTunedAugmented => "ft-aug",
        }
    }
}

/// Everything about a model except its weights; stored as `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format_version: u32,
    pub model_id: String,
    pub task: Task,
    pub variant: Variant,
    /// Paraphrased examples were part of the training data.
    pub augmented: bool,
    pub config: TrainConfig,
    pub threshold: f64,
    /// Training examples per label.
    pub train_counts: BTreeMap<String, usize>,
    pub metrics: BTreeMap<String, f64>,
    pub created_at: DateTime<Utc>,
}

/// Output of one forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub label: String,
    pub score: f64,
    /// In registry order.
    pub probabilities: Vec<f64>,
    pub truncated: bool,
}

/// An immutable trained (or deliberately untrained) classifier.
///
/// The label registry is frozen at training time: predictions only ever
/// use its labels. Cloning is cheap and handles may be shared across
/// threads.
#[derive(Debug, Clone)]
pub struct ModelHandle {
    pub meta: ModelMeta,
    registry: LabelRegistry,
    net: Arc<Network>,
}

fn check_examples(task: Task, train: &[LabeledExample], registry: &LabelRegistry) -> Result<Vec<usize>> {
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    train
        .iter()
        .map(|ex| {
            if ex.task != task {
                return Err(Error::Validation(format!(
                    "example {} is for task {}, expected {task}",
                    ex.id, ex.task
                )));
            }
            registry.index_of(&ex.label).ok_or_else(|| {
                Error::Validation(format!("example {} has label {:?} outside the {task} registry", ex.id, ex.label))
            })
        })
        .collect()
}

fn model_id(task: Task, variant: Variant, config: &TrainConfig, train: &[LabeledExample]) -> Result<String> {
    let mut key = serde_json::to_string(config)?;
    for ex in train {
        key.push('\n');
        key.push_str(&ex.id);
        key.push('\t');
        key.push_str(&ex.label);
    }
    Ok(format!("{task}-{}-{}", variant.slug(), &sha256_hex(key.as_bytes())[..10]))
}

/// Splits by source so a paraphrase never lands on the other side of its
/// original; only originals are kept for validation.
fn carve_validation(
    train: &[LabeledExample],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    if fraction <= 0.0 {
        return ((0..train.len()).collect(), Vec::new());
    }
    let mut sources: Vec<&str> = train
        .iter()
        .map(|e| e.source_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0a11);
    sources.shuffle(&mut rng);
    let n_val = ((sources.len() as f64) * fraction).round() as usize;
    let val: BTreeSet<&str> = sources.into_iter().take(n_val).collect();
    let mut fit = Vec::new();
    let mut held = Vec::new();
    for (i, ex) in train.iter().enumerate() {
        if !val.contains(ex.source_id.as_str()) {
            fit.push(i);
        } else if ex.provenance.is_original() {
            held.push(i);
        }
    }
    (fit, held)
}

fn fit(
    task: Task,
    train: &[LabeledExample],
    registries: &Registries,
    config: &TrainConfig,
    validation_fraction: f64,
) -> Result<ModelHandle> {
    config.validate()?;
    let registry = registries.get(task).clone();
    let classes = check_examples(task, train, &registry)?;
    let distinct: BTreeSet<usize> = classes.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Config(format!(
            "training set for {task} has a single class ({}); at least two are required",
            registry.name(*distinct.iter().next().unwrap_or(&0))
        )));
    }

    let (fit_idx, val_idx) = carve_validation(train, validation_fraction, config.seed);
    let fit_classes: BTreeSet<usize> = fit_idx.iter().map(|&i| classes[i]).collect();
    if fit_classes.len() < 2 {
        return Err(Error::Config(format!(
            "after holding out validation data the {task} training set has a single class"
        )));
    }

    let augmented = train.iter().any(|e| !e.provenance.is_original());
    let variant = if augmented { Variant::FineTunedAugmented } else { Variant::FineTuned };
    let features: Vec<Vec<u32>> = fit_idx
        .iter()
        .map(|&i| featurize(&train[i].text, config.max_sequence_length, config.buckets).ids)
        .collect();

    let mut counts = vec![0usize; registry.len()];
    for &i in &fit_idx {
        counts[classes[i]] += 1;
    }
    let weights: Vec<f32> = if config.class_weighting {
        let k = fit_classes.len() as f32;
        let n = fit_idx.len() as f32;
        counts.iter().map(|&c| if c == 0 { 0.0 } else { n / (k * c as f32) }).collect()
    } else {
        vec![1.0; registry.len()]
    };
    let samples: Vec<Sample> = fit_idx
        .iter()
        .zip(&features)
        .map(|(&i, ids)| Sample {
            ids,
            class: classes[i],
            weight: weights[classes[i]],
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Network::init(config.embedding_dim, config.buckets, registry.len(), &mut rng);
    let started = std::time::Instant::now();
    let loss = net.train(&samples, config.epochs, config.learning_rate, config.batch_size, &mut rng);
    info!(%task, examples = samples.len(), loss, secs = started.elapsed().as_secs_f64(), "trained");

    let mut meta = ModelMeta {
        format_version: FORMAT_VERSION,
        model_id: model_id(task, variant, config, train)?,
        task,
        variant,
        augmented,
        config: config.clone(),
        threshold: DEFAULT_THRESHOLD,
        train_counts: registry
            .labels()
            .zip(&counts)
            .filter(|(_, &c)| c > 0)
            .map(|(l, &c)| (l.to_owned(), c))
            .collect(),
        metrics: BTreeMap::from([
            ("train_loss".to_owned(), loss),
            ("train_examples".to_owned(), samples.len() as f64),
        ]),
        created_at: Utc::now(),
    };
    let mut handle = ModelHandle {
        meta: meta.clone(),
        registry,
        net: Arc::new(net),
    };
    if !val_idx.is_empty() {
        let texts: Vec<&str> = val_idx.iter().map(|&i| train[i].text.as_str()).collect();
        let golds: Vec<&str> = val_idx.iter().map(|&i| train[i].label.as_str()).collect();
        let preds: Vec<String> = handle.score_texts(&texts).into_iter().map(|s| s.label).collect();
        let report = EvalReport::compute(&meta.model_id, &preds, &golds, &handle.registry)?;
        meta.metrics.insert("validation_examples".into(), val_idx.len() as f64);
        meta.metrics.insert("validation_accuracy".into(), report.accuracy);
        meta.metrics.insert("validation_weighted_f1".into(), report.overall.f1);
        handle.meta = meta;
    }
    Ok(handle)
}

/// Trains the binary violence detector on every example given.
pub fn train_detector(train: &[LabeledExample], registries: &Registries, config: &TrainConfig) -> Result<ModelHandle> {
    fit(Task::Detect, train, registries, config, 0.0)
}

/// Trains one categorizer for a single dimension, holding out
/// `config.validation_fraction` of the sources for validation metrics.
pub fn train_categorizer(
    task: Task,
    train: &[LabeledExample],
    registries: &Registries,
    config: &TrainConfig,
) -> Result<ModelHandle> {
    if !task.is_categorization() {
        return Err(Error::Validation(format!("{task} is not a categorization dimension")));
    }
    fit(task, train, registries, config, config.validation_fraction)
}

/// An untrained classifier (random encoder and random head), the
/// reference point for what fine-tuning adds.
pub fn as_is_model(task: Task, registries: &Registries, config: &TrainConfig) -> Result<ModelHandle> {
    config.validate()?;
    let registry = registries.get(task).clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let net = Network::untrained(config.embedding_dim, config.buckets, registry.len(), &mut rng);
    Ok(ModelHandle {
        meta: ModelMeta {
            format_version: FORMAT_VERSION,
            model_id: model_id(task, Variant::AsIs, config, &[])?,
            task,
            variant: Variant::AsIs,
            augmented: false,
            config: config.clone(),
            threshold: DEFAULT_THRESHOLD,
            train_counts: BTreeMap::new(),
            metrics: BTreeMap::new(),
            created_at: Utc::now(),
        },
        registry,
        net: Arc::new(net),
    })
}

impl ModelHandle {
    pub fn model_id(&self) -> &str {
        &self.meta.model_id
    }

    pub fn task(&self) -> Task {
        self.meta.task
    }

    pub fn registry(&self) -> &LabelRegistry {
        &self.registry
    }

    /// A copy with a different detection threshold.
    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Validation(format!("threshold {threshold} outside [0, 1]")));
        }
        let mut h = self.clone();
        h.meta.threshold = threshold;
        Ok(h)
    }

    fn score_one(&self, text: &str) -> Scored {
        let cfg = &self.meta.config;
        let f = featurize(text, cfg.max_sequence_length, cfg.buckets);
        let probabilities = self.net.probabilities(&f.ids);
        let (label, score) = if self.meta.task == Task::Detect {
            let v = self.registry.index_of(VIOLENT).unwrap_or(0);
            let p = probabilities[v];
            let idx = if p >= self.meta.threshold { v } else { 1 - v };
            (self.registry.name(idx).to_owned(), p)
        } else {
            // First maximum wins, i.e. ties go to the earlier label.
            let mut best = 0;
            for (i, &p) in probabilities.iter().enumerate() {
                if p > probabilities[best] {
                    best = i;
                }
            }
            (self.registry.name(best).to_owned(), probabilities[best])
        };
        Scored {
            label,
            score,
            probabilities,
            truncated: f.truncated,
        }
    }

    /// Scores texts in parallel; output order matches input order. For the
    /// detector `score` is the violent-class probability, otherwise the
    /// probability of the winning class.
    pub fn score_texts<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Vec<Scored> {
        texts.par_iter().map(|t| self.score_one(t.as_ref())).collect()
    }

    fn predict(&self, passages: &[Passage]) -> Vec<Prediction> {
        let now = Utc::now();
        self.score_texts(&passages.iter().map(|p| p.text.as_str()).collect::<Vec<_>>())
            .into_iter()
            .zip(passages)
            .map(|(s, p)| Prediction {
                id: uuid::Uuid::new_v4().to_string(),
                passage_id: p.id.clone(),
                task: self.meta.task,
                label: s.label,
                score: s.score,
                probabilities: s.probabilities,
                truncated: s.truncated,
                model_id: self.meta.model_id.clone(),
                created_at: now,
            })
            .collect()
    }

    /// Writes `config.json`, `registry.txt`, `weights.bin` and
    /// `metrics.json` under `{dir}/{model_id}/`; returns that directory.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let out = dir.join(&self.meta.model_id);
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        write_atomic(&out.join("config.json"), |w| {
            w.write_all(&pretty_json(&self.meta)?).map_err(|e| Error::io("config.json", e))
        })?;
        write_atomic(&out.join("registry.txt"), |w| {
            w.write_all(self.registry.to_tsv().as_bytes()).map_err(|e| Error::io("registry.txt", e))
        })?;
        write_atomic(&out.join("weights.bin"), |w| {
            w.write_all(&self.net.to_bytes()).map_err(|e| Error::io("weights.bin", e))
        })?;
        write_atomic(&out.join("metrics.json"), |w| {
            w.write_all(&pretty_json(&self.meta.metrics)?).map_err(|e| Error::io("metrics.json", e))
        })?;
        Ok(out)
    }

    /// Loads a model directory written by [`ModelHandle::save`].
    pub fn load(model_dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = model_dir.join(name);
            std::fs::read(&p).map_err(|e| Error::io(p, e))
        };
        let meta: ModelMeta = serde_json::from_slice(&read("config.json")?)?;
        if meta.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "model format version {} is not supported",
                meta.format_version
            )));
        }
        let registry_src = String::from_utf8(read("registry.txt")?)
            .map_err(|_| Error::Format("registry.txt is not UTF-8".into()))?;
        let registry = LabelRegistry::parse_tsv(meta.task, &registry_src)?;
        let cfg = &meta.config;
        let net = Network::from_bytes(cfg.embedding_dim, cfg.buckets, registry.len(), &read("weights.bin")?)?;
        Ok(Self {
            meta,
            registry,
            net: Arc::new(net),
        })
    }

    /// Loads `{models_dir}/{model_id}`.
    pub fn load_by_id(models_dir: &Path, model_id: &str) -> Result<Self> {
        if model_id.is_empty() || model_id.contains(['/', '\\']) || model_id.starts_with('.') {
            return Err(Error::Validation(format!("invalid model id {model_id:?}")));
        }
        let dir = models_dir.join(model_id);
        if !dir.join("config.json").is_file() {
            return Err(Error::NotFound(format!("model {model_id}")));
        }
        Self::load(&dir)
    }
}

fn pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Detector predictions, one per passage, in input order.
pub fn predict_violence(handle: &ModelHandle, passages: &[Passage]) -> Result<Vec<Prediction>> {
    if handle.task() != Task::Detect {
        return Err(Error::Validation(format!(
            "model {} is a {} model, not a detector",
            handle.model_id(),
            handle.task()
        )));
    }
    Ok(handle.predict(passages))
}

/// Categorizer predictions, one per passage, in input order.
pub fn predict_category(handle: &ModelHandle, passages: &[Passage]) -> Result<Vec<Prediction>> {
    if !handle.task().is_categorization() {
        return Err(Error::Validation(format!(
            "model {} is a {} model, not a categorizer",
            handle.model_id(),
            handle.task()
        )));
    }
    Ok(handle.predict(passages))
}

/// Dispatches on the model's task.
pub fn predict(handle: &ModelHandle, passages: &[Passage]) -> Result<Vec<Prediction>> {
    if handle.task() == Task::Detect {
        predict_violence(handle, passages)
    } else {
        predict_category(handle, passages)
    }
}
