use polemos_core::dataset::{
    make_detection_split, DatasetSplit, DetectionSplitConfig, Registries, Task, NONVIOLENT, VIOLENT,
};
use polemos_core::fixture::{generate, FIXTURE_SEED, NONVIOLENT_SECTIONS, VIOLENT_SECTIONS};
use polemos_core::ingest::{align_events, detection_pool, parse_corpus};
use polemos_core::models::{predict_violence, train_detector, TrainConfig};
use polemos_core::store::jsonl::read_jsonl;
use polemos_core::store::{CuratedEvent, Decision, Store, VerdictInput};

#[test]
fn files_on_disk_flow_through_split_store_and_feedback() {
    let dir = tempfile::tempdir().unwrap();
    let fx = generate(FIXTURE_SEED).unwrap();
    let paths = fx.write(dir.path()).unwrap();

    let parsed = parse_corpus(&paths.corpus_files).unwrap();
    assert_eq!(parsed.passages.len(), fx.passages.len());
    let events: Vec<CuratedEvent> = read_jsonl(&paths.events).unwrap();
    let alignment = align_events(&events, &parsed.passages);
    assert_eq!(alignment.report.violent_passages, VIOLENT_SECTIONS);
    assert_eq!(alignment.report.nonviolent_passages, NONVIOLENT_SECTIONS);

    let pool = detection_pool(&parsed.passages, &alignment);
    let split = make_detection_split(&pool.violent, &pool.nonviolent, &DetectionSplitConfig::default()).unwrap();
    let regs = Registries::builtin();
    split.check_invariants(&regs).unwrap();
    let mut buf = Vec::new();
    split.write_jsonl(&mut buf).unwrap();
    assert_eq!(DatasetSplit::read_jsonl(buf.as_slice()).unwrap(), split);

    let db = dir.path().join("state/polemos.sqlite");
    {
        let store = Store::open(&db, regs.clone()).unwrap();
        store.put_passages(&parsed.passages).unwrap();
        store.put_events(&events).unwrap();
        let model = train_detector(&split.train, &regs, &TrainConfig { epochs: 2, ..Default::default() }).unwrap();
        let works = vec!["Numa".to_string()];
        let numa = store.passages(Some(&works)).unwrap();
        let preds = predict_violence(&model, &numa).unwrap();
        store.put_predictions(&preds).unwrap();
        store
            .record_verdict(&VerdictInput {
                prediction_id: preds[0].id.clone(),
                decision: Decision::Relabel,
                corrected_label: Some(if preds[0].label == VIOLENT { NONVIOLENT } else { VIOLENT }.into()),
                reviewer: "r1".into(),
            })
            .unwrap();
    }

    // Everything survives reopening the database file.
    let store = Store::open(&db, regs).unwrap();
    assert_eq!(store.passages(None).unwrap().len(), parsed.passages.len());
    assert_eq!(store.events().unwrap().len(), events.len());
    let pending = store.review_queue(Some(Task::Detect)).unwrap();
    assert_eq!(pending.len(), 59);
    let feedback = store.export_feedback(Some(Task::Detect)).unwrap();
    assert_eq!(feedback.len(), 1);
    assert_eq!(feedback[0].work_id.as_deref(), Some("Numa"));
    assert!(feedback[0].provenance.is_original());
}
