use std::sync::OnceLock;

use polemos_core::dataset::{
    augment, make_categorization_split, make_detection_split, AugmentOptions, DatasetSplit,
    DetectionSplitConfig, LabeledExample, Registries, Task, DEFAULT_SEED, NONVIOLENT, VIOLENT,
};
use polemos_core::fixture::{generate, Fixture, CLEITUS_TEXT, FIXTURE_SEED};
use polemos_core::ingest::{align_events, detection_pool};
use polemos_core::llm::StubParaphraser;
use polemos_core::models::*;
use polemos_core::store::{Passage, SourceRef};
use polemos_core::Error;

fn fixture() -> &'static Fixture {
    static FX: OnceLock<Fixture> = OnceLock::new();
    FX.get_or_init(|| generate(FIXTURE_SEED).unwrap())
}

fn detection_split() -> &'static DatasetSplit {
    static S: OnceLock<DatasetSplit> = OnceLock::new();
    S.get_or_init(|| {
        let fx = fixture();
        let a = align_events(&fx.events, &fx.passages);
        let pool = detection_pool(&fx.passages, &a);
        make_detection_split(&pool.violent, &pool.nonviolent, &DetectionSplitConfig::default()).unwrap()
    })
}

fn detector() -> &'static ModelHandle {
    static H: OnceLock<ModelHandle> = OnceLock::new();
    H.get_or_init(|| train_detector(&detection_split().train, &Registries::builtin(), &TrainConfig::default()).unwrap())
}

fn passage(id: u32, text: &str) -> Passage {
    Passage::new(SourceRef::new("Test", 1, id).unwrap(), text).unwrap()
}

#[test]
fn variant_tags_follow_training_data() {
    let regs = Registries::builtin();
    assert_eq!(detector().meta.variant, Variant::FineTuned);
    assert!(!detector().meta.augmented);
    assert_eq!(detector().meta.variant.to_string(), "fine-tuned");
    let aug = augment(&detection_split().train, &StubParaphraser, &AugmentOptions::default()).unwrap();
    let h = train_detector(&aug.examples, &regs, &TrainConfig { epochs: 2, ..Default::default() }).unwrap();
    assert_eq!(h.meta.variant.to_string(), "fine-tuned and augmented");
    assert_eq!(h.meta.train_counts[VIOLENT], 1328);
    assert_eq!(h.meta.train_counts[NONVIOLENT], 6928);
}

#[test]
fn single_class_training_is_config_error() {
    let only: Vec<LabeledExample> = detection_split()
        .train
        .iter()
        .filter(|e| e.label == NONVIOLENT)
        .cloned()
        .collect();
    let err = train_detector(&only, &Registries::builtin(), &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err:?}");
    assert!(matches!(
        train_detector(&[], &Registries::builtin(), &TrainConfig::default()),
        Err(Error::Config(_))
    ));
}

#[test]
fn full_tier_backbone_is_rejected() {
    let err = train_detector(&detection_split().train, &Registries::builtin(), &TrainConfig::full_tier()).unwrap_err();
    assert!(matches!(err, Error::Config(m) if m.contains("not available")));
}

#[test]
fn cleitus_passage_is_violent() {
    let preds = predict_violence(detector(), &[passage(1, CLEITUS_TEXT)]).unwrap();
    assert_eq!(preds[0].label, VIOLENT);
    assert!(preds[0].score >= 0.5);
}

#[test]
fn empty_input_gives_empty_output() {
    assert!(predict_violence(detector(), &[]).unwrap().is_empty());
}

#[test]
fn long_passage_is_truncated_and_flagged() {
    let cfg = &detector().meta.config;
    let long = "the army marched on ".repeat(cfg.max_sequence_length / 2);
    let preds = predict_violence(detector(), &[passage(1, &long), passage(2, "A short quiet passage.")]).unwrap();
    assert!(preds[0].truncated);
    assert!(!preds[1].truncated);
    assert_eq!(preds[0].passage_id, "Test:1.1");
    assert_eq!(preds[1].passage_id, "Test:1.2");
}

#[test]
fn task_mismatch_is_rejected() {
    assert!(predict_category(detector(), &[passage(1, "x")]).is_err());
    let regs = Registries::builtin();
    let split = make_categorization_split(&fixture().events, Task::Level, 0.8, DEFAULT_SEED).unwrap();
    let h = train_categorizer(Task::Level, &split.train, &regs, &TrainConfig { epochs: 2, ..Default::default() }).unwrap();
    assert!(predict_violence(&h, &[passage(1, "x")]).is_err());
    assert!(matches!(
        train_categorizer(Task::Detect, &split.train, &regs, &TrainConfig::default()),
        Err(Error::Validation(_))
    ));
    assert!("weapon".parse::<Task>().is_err());
}

#[test]
fn level_model_and_cleitus() {
    let regs = Registries::builtin();
    let split = make_categorization_split(&fixture().events, Task::Level, 0.8, DEFAULT_SEED).unwrap();
    let h = train_categorizer(Task::Level, &split.train, &regs, &TrainConfig::default()).unwrap();
    assert_eq!(h.registry().len(), 4);
    assert!(h.meta.metrics["validation_examples"] > 0.0);
    let p = predict_category(&h, &[passage(1, CLEITUS_TEXT)]).unwrap();
    assert_eq!(p[0].label, "interpersonal");
}

#[test]
fn consequence_model_keeps_full_registry() {
    let regs = Registries::builtin();
    let split = make_categorization_split(&fixture().events, Task::Consequence, 0.8, DEFAULT_SEED).unwrap();
    let some: Vec<LabeledExample> = split.train.iter().filter(|e| e.label == "unknown" || e.label == "death").cloned().collect();
    let h = train_categorizer(Task::Consequence, &some, &regs, &TrainConfig { epochs: 2, ..Default::default() }).unwrap();
    assert_eq!(h.registry().len(), 38);
    let p = predict_category(&h, &[passage(1, "They fought.")]).unwrap();
    assert_eq!(p[0].probabilities.len(), 38);
}

#[test]
fn probabilities_normalized_and_argmax_consistent() {
    let regs = Registries::builtin();
    let split = make_categorization_split(&fixture().events, Task::Motive, 0.8, DEFAULT_SEED).unwrap();
    let h = train_categorizer(Task::Motive, &split.train, &regs, &TrainConfig { epochs: 5, ..Default::default() }).unwrap();
    let texts: Vec<&str> = split.test.iter().map(|e| e.text.as_str()).collect();
    for s in h.score_texts(&texts) {
        assert!((s.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!((0.0..=1.0).contains(&s.score));
        let best = s
            .probabilities
            .iter()
            .enumerate()
            .fold(0, |b, (i, &p)| if p > s.probabilities[b] { i } else { b });
        assert_eq!(s.label, h.registry().name(best));
        assert_eq!(s.score, s.probabilities[best]);
    }
    for p in predict_violence(detector(), &fixture().passages[..200]).unwrap() {
        assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert_eq!(p.label == VIOLENT, p.score >= 0.5);
    }
}

#[test]
fn training_and_inference_are_deterministic() {
    let regs = Registries::builtin();
    let cfg = TrainConfig { epochs: 3, ..Default::default() };
    let a = train_detector(&detection_split().train, &regs, &cfg).unwrap();
    let b = train_detector(&detection_split().train, &regs, &cfg).unwrap();
    assert_eq!(a.model_id(), b.model_id());
    let texts: Vec<&str> = detection_split().test.iter().map(|e| e.text.as_str()).collect();
    assert_eq!(a.score_texts(&texts), b.score_texts(&texts));
}

#[test]
fn artifacts_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let saved = detector().save(dir.path()).unwrap();
    for f in ["config.json", "registry.txt", "weights.bin", "metrics.json"] {
        assert!(saved.join(f).is_file(), "{f}");
    }
    let back = ModelHandle::load_by_id(dir.path(), detector().model_id()).unwrap();
    assert_eq!(back.meta, detector().meta);
    let texts: Vec<&str> = detection_split().test.iter().map(|e| e.text.as_str()).collect();
    let x = detector().score_texts(&texts);
    let y = back.score_texts(&texts);
    for (a, b) in x.iter().zip(&y) {
        assert_eq!(a.label, b.label);
        assert!((a.score - b.score).abs() < 1e-6);
    }
    assert!(matches!(ModelHandle::load_by_id(dir.path(), "nope"), Err(Error::NotFound(_))));
    assert!(ModelHandle::load_by_id(dir.path(), "../etc").is_err());
}

#[test]
fn raising_threshold_never_adds_violent_labels() {
    let passages = &fixture().passages[..400];
    let mut last = usize::MAX;
    for t in [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
        let h = detector().with_threshold(t).unwrap();
        let n = predict_violence(&h, passages).unwrap().iter().filter(|p| p.label == VIOLENT).count();
        assert!(n <= last, "threshold {t}: {n} > {last}");
        last = n;
    }
    assert!(detector().with_threshold(1.5).is_err());
}

#[test]
fn as_is_model_is_degenerate() {
    let regs = Registries::builtin();
    let h = as_is_model(Task::Detect, &regs, &TrainConfig::default()).unwrap();
    assert_eq!(h.meta.variant, Variant::AsIs);
    let texts: Vec<&str> = detection_split().test.iter().map(|e| e.text.as_str()).collect();
    let labels: std::collections::BTreeSet<String> = h.score_texts(&texts).into_iter().map(|s| s.label).collect();
    // An untrained head maps nearly every text to the same side.
    let scores: Vec<f64> = h.score_texts(&texts).into_iter().map(|s| s.score).collect();
    let spread = scores.iter().cloned().fold(f64::MIN, f64::max) - scores.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.2, "{spread}");
    assert!(labels.len() <= 2);
}
