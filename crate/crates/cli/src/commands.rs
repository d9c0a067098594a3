use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use polemos_core::dataset::{
    augment, make_categorization_split, make_detection_split, AugmentOptions, DatasetSplit, DetectionSplitConfig,
    LabeledExample, Registries, Task, DEFAULT_SEED,
};
use polemos_core::eval::{mcnemar, render_report, EvalRecord, EvalReport, ReportFormat};
use polemos_core::fixture::{generate, FIXTURE_SEED};
use polemos_core::ingest::{align_events, detection_pool, parse_corpus};
use polemos_core::llm::{
    ChatBackend, HttpChatBackend, LlmParaphraser, Paraphraser, ResponseCache, StubChatBackend, StubParaphraser,
    ZeroShotClassifier,
};
use polemos_core::models::{as_is_model, train_categorizer, train_detector, ModelHandle, TrainConfig};
use polemos_core::store::jsonl::{read_jsonl, write_atomic, write_jsonl};
use polemos_core::store::{CuratedEvent, Passage, Prediction, Store};
use polemos_core::{Error, Result};
use polemos_service::{plan_job, worker::run_job, JobRequest, JobSubmission, ServiceConfig};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{pick, FileConfig};
use crate::error::{require, CliError, CliResult};
use crate::manifest::{hex, ManifestBuilder};
use crate::*;

/// Settings shared by every subcommand after flag/file/default resolution.
pub struct Context {
    pub file: FileConfig,
    pub db: PathBuf,
    pub models_dir: PathBuf,
    pub artifacts_dir: PathBuf,
    pub runs_dir: PathBuf,
    pub registries: Registries,
}

impl Context {
    pub fn resolve(g: &GlobalArgs) -> CliResult<Self> {
        let file = match &g.config {
            Some(p) => {
                require(p)?;
                FileConfig::load(p)?
            }
            None => FileConfig::default(),
        };
        let registries_dir = g.registries_dir.clone().or(file.registries_dir.clone());
        let registries = match &registries_dir {
            Some(d) => {
                require(d)?;
                Registries::load_dir(d)?
            }
            None => Registries::builtin(),
        };
        Ok(Self {
            db: pick(g.db.clone(), file.db.clone(), "polemos.sqlite".into()),
            models_dir: pick(g.models_dir.clone(), file.models_dir.clone(), "models".into()),
            artifacts_dir: pick(g.artifacts_dir.clone(), file.artifacts_dir.clone(), "artifacts".into()),
            runs_dir: pick(g.runs_dir.clone(), file.runs_dir.clone(), "runs".into()),
            registries,
            file,
        })
    }

    fn open_store(&self) -> Result<Store> {
        Store::open(&self.db, self.registries.clone())
    }

    fn open_existing_store(&self) -> CliResult<Store> {
        require(&self.db)?;
        Ok(self.open_store()?)
    }

    fn seed(&self, flag: Option<u64>) -> u64 {
        pick(flag, self.file.seed, DEFAULT_SEED)
    }
}

/// Runs one parsed command line, writing human or JSON output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let ctx = Context::resolve(&cli.global)?;
    match cli.command {
        Command::MakeFixture(a) => make_fixture(&ctx, a, out),
        Command::Ingest(a) => ingest(&ctx, a, out),
        Command::BuildDataset(a) => build_dataset(&ctx, a, out),
        Command::Augment(a) => augment_cmd(&ctx, a, out),
        Command::Train(a) => train(&ctx, a, out),
        Command::Evaluate(a) => evaluate(&ctx, a, out),
        Command::Report(a) => report(&ctx, a, out),
        Command::Annotate(a) => annotate(&ctx, a, out),
        Command::AnnotateZeroshot(a) => annotate_zeroshot(&ctx, a, out),
        Command::Serve(a) => serve(&ctx, a),
    }
}

fn emit(out: &mut dyn Write, v: &impl Serialize) -> CliResult<()> {
    let s = serde_json::to_string_pretty(v)?;
    writeln!(out, "{s}").map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?;
    Ok(())
}

fn emit_text(out: &mut dyn Write, s: &str) -> CliResult<()> {
    out.write_all(s.as_bytes()).map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?;
    Ok(())
}

fn finish(ctx: &Context, m: ManifestBuilder) -> CliResult<PathBuf> {
    let (path, manifest) = m.finish(&ctx.runs_dir)?;
    tracing::info!(manifest = %path.display(), previous = ?manifest.previous, "run recorded");
    Ok(path)
}

fn digest_json(v: &impl Serialize) -> Result<String> {
    Ok(hex(&Sha256::digest(serde_json::to_vec(v)?)))
}

fn read_dataset(path: &Path) -> CliResult<DatasetSplit> {
    require(path)?;
    let f = File::open(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    DatasetSplit::read_jsonl(BufReader::new(f)).map_err(|e| relabel_origin(e, path).into())
}

fn relabel_origin(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { line, message, .. } => Error::Parse { file: path.into(), line, message },
        other => other,
    }
}

fn write_dataset(path: &Path, split: &DatasetSplit) -> Result<()> {
    write_atomic(path, |w| split.write_jsonl(w))
}

fn write_json_file(path: &Path, v: &impl Serialize) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, v)?;
        w.write_all(b"\n").map_err(|e| Error::Io { path: path.into(), source: e })
    })
}

// ---- make-fixture ------------------------------------------------------

fn make_fixture(ctx: &Context, a: MakeFixtureArgs, out: &mut dyn Write) -> CliResult<()> {
    let seed = a.seed.unwrap_or(FIXTURE_SEED);
    let mut m = ManifestBuilder::new("make-fixture", json!({ "seed": seed }));
    let fx = generate(seed)?;
    let paths = fx.write(&a.out)?;
    m.output(&paths.corpus_dir);
    m.output(&paths.events);
    let manifest = finish(ctx, m)?;
    emit(
        out,
        &json!({
            "corpus_dir": paths.corpus_dir,
            "events": paths.events,
            "works": paths.corpus_files.len(),
            "passages": fx.passages.len(),
            "event_count": fx.events.len(),
            "manifest": manifest,
        }),
    )
}

// ---- ingest ------------------------------------------------------------

fn corpus_files(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        require(p)?;
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::Io { path: p.clone(), source: e })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| matches!(f.extension().and_then(|x| x.to_str()), Some("txt" | "jsonl")))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::Validation("no .txt or .jsonl corpus files found".into()).into());
    }
    Ok(files)
}

fn ingest(ctx: &Context, a: IngestArgs, out: &mut dyn Write) -> CliResult<()> {
    let files = corpus_files(&a.corpus)?;
    if let Some(e) = &a.events {
        require(e)?;
    }
    let mut m = ManifestBuilder::new("ingest", json!({ "db": ctx.db }));
    let (jsonl, text): (Vec<PathBuf>, Vec<PathBuf>) =
        files.into_iter().partition(|f| f.extension().and_then(|x| x.to_str()) == Some("jsonl"));
    let parsed = parse_corpus(&text)?;
    let mut passages = parsed.passages;
    for f in &jsonl {
        for p in read_jsonl::<Passage>(f)? {
            p.validate()?;
            passages.push(p);
        }
    }
    passages.sort_by(|x, y| x.source.cmp(&y.source));
    if let Some(w) = passages.windows(2).find(|w| w[0].source == w[1].source) {
        return Err(Error::Validation(format!("section {} appears twice in the corpus", w[0].source)).into());
    }
    for f in text.iter().chain(&jsonl) {
        m.input(f)?;
    }
    let events: Vec<CuratedEvent> = match &a.events {
        Some(p) => {
            m.input(p)?;
            read_jsonl(p)?
        }
        None => Vec::new(),
    };
    let alignment = align_events(&events, &passages);
    for u in &alignment.report.unmatched {
        tracing::debug!(event = %u.event_id, reason = %u.reason, "event not aligned");
    }
    let store = ctx.open_store()?;
    let stored_passages = store.put_passages(&passages)?;
    let stored_events = store.put_events(&events)?;
    let report_path = a.report.unwrap_or_else(|| ctx.artifacts_dir.join("alignment_report.json"));
    write_json_file(&report_path, &alignment.report)?;
    m.output(&report_path);
    let manifest = finish(ctx, m)?;
    let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
    for u in &alignment.report.unmatched {
        let kind = u.reason.split(':').next().unwrap_or(&u.reason);
        *reasons.entry(kind).or_default() += 1;
    }
    emit(
        out,
        &json!({
            "passages": passages.len(),
            "passages_stored": stored_passages,
            "parse_warnings": parsed.warnings.len(),
            "events": events.len(),
            "events_stored": stored_events,
            "matched": alignment.report.matched,
            "unmatched": reasons,
            "violent_passages": alignment.report.violent_passages,
            "nonviolent_passages": alignment.report.nonviolent_passages,
            "report": report_path,
            "manifest": manifest,
        }),
    )
}

// ---- build-dataset -----------------------------------------------------

fn build_dataset(ctx: &Context, a: BuildDatasetArgs, out: &mut dyn Write) -> CliResult<()> {
    let task: Task = a.task.into();
    let seed = ctx.seed(a.seed);
    let test_size = pick(a.test_size, ctx.file.dataset.test_size, 500);
    let train_frac = pick(a.train_frac, ctx.file.dataset.train_frac, 0.8);
    let store = ctx.open_existing_store()?;
    let passages = store.passages(None)?;
    let events = store.events()?;
    let settings = if task == Task::Detect {
        json!({ "task": task, "seed": seed, "test_size": test_size })
    } else {
        json!({ "task": task, "seed": seed, "train_frac": train_frac })
    };
    let mut m = ManifestBuilder::new("build-dataset", settings);
    m.input_digest("store:passages", digest_json(&passages)?);
    m.input_digest("store:events", digest_json(&events)?);
    let split = if task == Task::Detect {
        let alignment = align_events(&events, &passages);
        let pool = detection_pool(&passages, &alignment);
        make_detection_split(&pool.violent, &pool.nonviolent, &DetectionSplitConfig::with_test_size(test_size, seed))?
    } else {
        make_categorization_split(&events, task, train_frac, seed)?
    };
    split.check_invariants(&ctx.registries)?;
    let path = a.out.unwrap_or_else(|| ctx.artifacts_dir.join(format!("{task}_dataset.jsonl")));
    write_dataset(&path, &split)?;
    let stats_path = path.with_extension("stats.json");
    let stats = split.stats();
    write_json_file(&stats_path, &json!({ "task": task, "seed": seed, "stats": stats }))?;
    m.output(&path);
    m.output(&stats_path);
    let manifest = finish(ctx, m)?;
    emit(
        out,
        &json!({ "dataset": path, "stats": stats, "seed": seed, "manifest": manifest }),
    )
}

// ---- augment -----------------------------------------------------------

fn augment_cmd(ctx: &Context, a: AugmentArgs, out: &mut dyn Write) -> CliResult<()> {
    let split = read_dataset(&a.dataset)?;
    let cfg = &ctx.file.augment;
    let k = pick(a.k, cfg.k, 3);
    let parallelism = pick(a.parallelism, cfg.parallelism, 4);
    let which = match (a.paraphraser, cfg.paraphraser.as_deref()) {
        (Some(p), _) => p,
        (None, None | Some("stub")) => ParaphraserArg::Stub,
        (None, Some("llm")) => ParaphraserArg::Llm,
        (None, Some(other)) => {
            return Err(Error::Config(format!("augment.paraphraser must be stub or llm, got {other:?}")).into())
        }
    };
    let cache_dir = a.cache_dir.or(cfg.cache_dir.clone());
    let llm_model = a.llm_model.or(ctx.file.llm.model_name.clone());
    let paraphraser: Box<dyn Paraphraser> = match which {
        ParaphraserArg::Stub => Box::new(StubParaphraser),
        ParaphraserArg::Llm => {
            let model = llm_model.clone().ok_or_else(|| {
                Error::Config("the llm paraphraser needs a model name (--llm-model or llm.model_name)".into())
            })?;
            let backend = HttpChatBackend::from_env(ctx.file.llm.http_config())?;
            Box::new(LlmParaphraser::new(backend, model))
        }
    };
    let mut m = ManifestBuilder::new(
        "augment",
        json!({ "k": k, "paraphraser": format!("{which:?}").to_lowercase(), "llm_model": llm_model }),
    );
    m.input(&a.dataset)?;
    let options = AugmentOptions {
        k,
        parallelism,
        cache: cache_dir.map(ResponseCache::new).transpose()?,
    };
    let outcome = augment(&split.train, paraphraser.as_ref(), &options)?;
    let augmented = DatasetSplit {
        train: outcome.examples.clone(),
        ..split
    };
    augmented.check_invariants(&ctx.registries)?;
    let path = a.out.unwrap_or_else(|| {
        let stem = a.dataset.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
        a.dataset.with_file_name(format!("{stem}_aug{k}.jsonl"))
    });
    write_dataset(&path, &augmented)?;
    m.output(&path);
    let failures_path = path.with_extension("failures.jsonl");
    if let Some(summary) = outcome.failure_summary() {
        tracing::warn!("{summary}");
        write_jsonl(&failures_path, &outcome.failures)?;
        m.output(&failures_path);
    }
    let manifest = finish(ctx, m)?;
    emit(
        out,
        &json!({
            "dataset": path,
            "stats": augmented.stats(),
            "failures": outcome.failures.len(),
            "failures_file": (!outcome.is_complete()).then_some(failures_path),
            "manifest": manifest,
        }),
    )
}

// ---- train -------------------------------------------------------------

fn train(ctx: &Context, a: TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let split = read_dataset(&a.dataset)?;
    let base = ctx.file.train.clone().unwrap_or_default();
    let cfg = TrainConfig {
        backbone: a.backbone.clone().unwrap_or(base.backbone),
        epochs: a.epochs.unwrap_or(base.epochs),
        learning_rate: a.learning_rate.unwrap_or(base.learning_rate),
        batch_size: a.batch_size.unwrap_or(base.batch_size),
        max_sequence_length: a.max_sequence_length.unwrap_or(base.max_sequence_length),
        seed: a.seed.or(ctx.file.seed).unwrap_or(base.seed),
        class_weighting: a.class_weighting || base.class_weighting,
        ..base
    };
    cfg.validate()?;
    let mut m = ManifestBuilder::new(
        "train",
        json!({ "config": cfg, "as_is": a.as_is, "threshold": a.threshold }),
    );
    m.input(&a.dataset)?;
    let mut handle = if a.as_is {
        as_is_model(split.task, &ctx.registries, &cfg)?
    } else if split.task == Task::Detect {
        train_detector(&split.train, &ctx.registries, &cfg)?
    } else {
        train_categorizer(split.task, &split.train, &ctx.registries, &cfg)?
    };
    if let Some(t) = a.threshold {
        handle = handle.with_threshold(t)?;
    }
    let dir = handle.save(&ctx.models_dir)?;
    m.output(&dir);
    let manifest = finish(ctx, m)?;
    emit(
        out,
        &json!({
            "model_id": handle.model_id(),
            "dir": dir,
            "task": handle.task(),
            "variant": handle.meta.variant.to_string(),
            "train_counts": handle.meta.train_counts,
            "metrics": handle.meta.metrics,
            "manifest": manifest,
        }),
    )
}

// ---- evaluate ----------------------------------------------------------

fn read_values(path: &Path) -> CliResult<Vec<(usize, Value)>> {
    require(path)?;
    let f = File::open(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::Io { path: path.into(), source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, v));
    }
    Ok(out)
}

fn field<'a>(v: &'a Value, names: &[&str]) -> Option<&'a str> {
    names.iter().find_map(|n| v.get(*n).and_then(Value::as_str))
}

fn missing(path: &Path, line: usize, what: &str) -> CliError {
    Error::Parse {
        file: path.into(),
        line,
        message: format!("missing {what}"),
    }
    .into()
}

struct Gold {
    id: String,
    task: Option<Task>,
    label: String,
}

/// Gold labels from records, labeled examples or a dataset file (whose
/// test split is used).
fn read_golds(path: &Path) -> CliResult<Vec<Gold>> {
    let mut out = Vec::new();
    for (line, v) in read_values(path)? {
        if v.get("split").and_then(Value::as_str).is_some_and(|s| s != "test") {
            continue;
        }
        let id = field(&v, &["passage_id", "source_id"]).ok_or_else(|| missing(path, line, "passage_id"))?;
        let label = field(&v, &["gold", "label"]).ok_or_else(|| missing(path, line, "gold label"))?;
        let task = field(&v, &["task"]).map(str::parse).transpose()?;
        out.push(Gold { id: id.into(), task, label: label.into() });
    }
    Ok(out)
}

struct Pred {
    id: String,
    label: String,
    model: Option<String>,
}

fn read_preds(path: &Path) -> CliResult<Vec<Pred>> {
    let mut out = Vec::new();
    for (line, v) in read_values(path)? {
        let id = field(&v, &["passage_id", "source_id"]).ok_or_else(|| missing(path, line, "passage_id"))?;
        let label = field(&v, &["pred", "label"]).ok_or_else(|| missing(path, line, "predicted label"))?;
        out.push(Pred {
            id: id.into(),
            label: label.into(),
            model: field(&v, &["model_id"]).map(str::to_string),
        });
    }
    Ok(out)
}

/// Joins predictions to golds; one record list per model, golds order.
fn join(preds: Vec<Pred>, golds: &[Gold], task: Task, default_name: &str) -> CliResult<Vec<(String, Vec<EvalRecord>)>> {
    let mut by_model: BTreeMap<String, HashMap<String, String>> = BTreeMap::new();
    for p in preds {
        let model = p.model.unwrap_or_else(|| default_name.to_string());
        let slot = by_model.entry(model.clone()).or_default();
        if slot.insert(p.id.clone(), p.label).is_some() {
            return Err(Error::Validation(format!("model {model} has two predictions for {}", p.id)).into());
        }
    }
    let mut out = Vec::new();
    for (model, preds) in by_model {
        let mut records = Vec::with_capacity(golds.len());
        let mut absent = Vec::new();
        for g in golds {
            match preds.get(&g.id) {
                Some(p) => records.push(EvalRecord {
                    passage_id: g.id.clone(),
                    task,
                    gold: g.label.clone(),
                    pred: p.clone(),
                }),
                None => absent.push(g.id.as_str()),
            }
        }
        if !absent.is_empty() {
            return Err(Error::Validation(format!(
                "model {model} has no prediction for {} gold item(s), e.g. {}",
                absent.len(),
                absent[0]
            ))
            .into());
        }
        out.push((model, records));
    }
    Ok(out)
}

fn records_task(records: &[EvalRecord], flag: Option<Task>) -> CliResult<Task> {
    let task = flag
        .or_else(|| records.first().map(|r| r.task))
        .ok_or_else(|| Error::Validation("no records to evaluate".into()))?;
    Ok(task)
}

fn score_dataset(model: &ModelHandle, split: &DatasetSplit) -> CliResult<Vec<EvalRecord>> {
    if model.task() != split.task {
        return Err(Error::Validation(format!(
            "model {} is a {} model but the dataset is for {}",
            model.model_id(),
            model.task(),
            split.task
        ))
        .into());
    }
    let texts: Vec<&str> = split.test.iter().map(|e| e.text.as_str()).collect();
    Ok(model
        .score_texts(&texts)
        .into_iter()
        .zip(&split.test)
        .map(|(s, e)| EvalRecord {
            passage_id: e.source_id.clone(),
            task: e.task,
            gold: e.label.clone(),
            pred: s.label,
        })
        .collect())
}

fn format_of(f: FormatArg) -> ReportFormat {
    match f {
        FormatArg::Text => ReportFormat::Text,
        FormatArg::Csv => ReportFormat::Csv,
    }
}

fn macro_lines(reports: &[EvalReport]) -> String {
    reports
        .iter()
        .map(|r| {
            let m = r.macro_overall();
            format!(
                "# macro {} {}: precision {:.4} recall {:.4} f1 {:.4}\n",
                r.task, r.model_id, m.precision, m.recall, m.f1
            )
        })
        .collect()
}

fn evaluate(ctx: &Context, a: EvaluateArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut m = ManifestBuilder::new(
        "evaluate",
        json!({ "model": a.model, "name": a.name, "format": format!("{:?}", a.format).to_lowercase() }),
    );
    let groups: Vec<(String, Vec<EvalRecord>)> = if let Some(model_id) = &a.model {
        let dataset = a.dataset.as_ref().expect("clap requires --dataset with --model");
        let split = read_dataset(dataset)?;
        m.input(dataset)?;
        let model = ModelHandle::load_by_id(&ctx.models_dir, model_id)?;
        m.input(&ctx.models_dir.join(model_id))?;
        let records = score_dataset(&model, &split)?;
        let path = a
            .records_out
            .clone()
            .unwrap_or_else(|| ctx.artifacts_dir.join("eval").join(format!("{model_id}.records.jsonl")));
        write_jsonl(&path, &records)?;
        m.output(&path);
        vec![(a.name.clone().unwrap_or_else(|| model_id.clone()), records)]
    } else if let Some(path) = &a.records {
        require(path)?;
        m.input(path)?;
        let records: Vec<EvalRecord> = read_jsonl(path)?;
        let name = a.name.clone().unwrap_or_else(|| stem(path));
        vec![(name, records)]
    } else if let (Some(p), Some(g)) = (&a.preds, &a.golds) {
        let golds = read_golds(g)?;
        let preds = read_preds(p)?;
        m.input(p)?;
        m.input(g)?;
        let task = match golds.iter().find_map(|g| g.task) {
            Some(t) => t,
            None => Task::Detect,
        };
        join(preds, &golds, task, &a.name.clone().unwrap_or_else(|| stem(p)))?
    } else {
        return Err(Error::Config("evaluate needs --preds/--golds, --records, or --model/--dataset".into()).into());
    };
    let mut reports = Vec::new();
    for (name, records) in &groups {
        let task = records_task(records, None)?;
        reports.push(EvalReport::from_records(name, records, ctx.registries.get(task))?);
    }
    let mut text = render_report(&reports, format_of(a.format));
    if a.macro_avg {
        text.push_str(&macro_lines(&reports));
    }
    if let Some(p) = &a.out {
        write_json_file(p, &reports)?;
        m.output(p);
    }
    finish(ctx, m)?;
    emit_text(out, &text)
}

fn stem(p: &Path) -> String {
    let s = p.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    s.strip_suffix(".records").unwrap_or(s).to_string()
}

// ---- report ------------------------------------------------------------

#[derive(Debug, Serialize)]
struct PairedTest {
    reference: String,
    model: String,
    n: usize,
    b: u64,
    c: u64,
    p_value: f64,
    significant: bool,
    degenerate: bool,
}

fn report(ctx: &Context, a: ReportArgs, out: &mut dyn Write) -> CliResult<()> {
    if !a.names.is_empty() && a.names.len() != a.inputs.len() {
        return Err(Error::Config(format!("{} names for {} inputs", a.names.len(), a.inputs.len())).into());
    }
    let mut m = ManifestBuilder::new("report", json!({ "names": a.names, "alpha": a.alpha }));
    let mut runs: Vec<(String, Vec<EvalRecord>)> = Vec::new();
    for (i, p) in a.inputs.iter().enumerate() {
        require(p)?;
        m.input(p)?;
        let name = a.names.get(i).cloned().unwrap_or_else(|| stem(p));
        runs.push((name, read_jsonl(p)?));
    }
    let mut reports = Vec::new();
    for (name, recs) in &runs {
        let task = records_task(recs, None)?;
        reports.push(EvalReport::from_records(name, recs, ctx.registries.get(task))?);
    }
    let mut tests = Vec::new();
    let (ref_name, ref_recs) = &runs[0];
    for (name, recs) in &runs[1..] {
        let other: HashMap<&str, &EvalRecord> = recs.iter().map(|r| (r.passage_id.as_str(), r)).collect();
        let (mut pa, mut pb, mut golds) = (Vec::new(), Vec::new(), Vec::new());
        for r in ref_recs {
            let Some(o) = other.get(r.passage_id.as_str()) else { continue };
            if o.gold != r.gold || o.task != r.task {
                return Err(Error::Validation(format!(
                    "{ref_name} and {name} disagree on the gold label of {}",
                    r.passage_id
                ))
                .into());
            }
            pa.push(r.pred.as_str());
            pb.push(o.pred.as_str());
            golds.push(r.gold.as_str());
        }
        let t = mcnemar(&pa, &pb, &golds)?;
        tests.push(PairedTest {
            reference: ref_name.clone(),
            model: name.clone(),
            n: golds.len(),
            b: t.b,
            c: t.c,
            p_value: t.p_value,
            significant: t.significant(a.alpha),
            degenerate: t.degenerate,
        });
    }
    let mut text = render_report(&reports, format_of(a.format));
    if a.format == FormatArg::Text {
        for t in &tests {
            text.push_str(&format!(
                "# mcnemar {} vs {} (n={}): b={} c={} p={:.4}{}\n",
                t.reference,
                t.model,
                t.n,
                t.b,
                t.c,
                t.p_value,
                if t.significant { format!(" significant at {}", a.alpha) } else { String::new() }
            ));
        }
    }
    if let Some(p) = &a.out {
        write_json_file(p, &json!({ "reports": reports, "mcnemar": tests }))?;
        m.output(p);
    }
    finish(ctx, m)?;
    emit_text(out, &text)
}

// ---- annotate ----------------------------------------------------------

fn annotate(ctx: &Context, a: AnnotateArgs, out: &mut dyn Write) -> CliResult<()> {
    let store = ctx.open_existing_store()?;
    let model = ModelHandle::load_by_id(&ctx.models_dir, &a.model)?;
    let req = JobRequest {
        task: model.task(),
        model_id: a.model.clone(),
        works: a.works.clone(),
        force: a.force,
    };
    let mut m = ManifestBuilder::new("annotate", json!({ "model": a.model, "works": a.works, "force": a.force }));
    m.input(&ctx.models_dir.join(&a.model))?;
    let job = match plan_job(&store, &ctx.models_dir, &req)? {
        JobSubmission::Existing(job) => {
            tracing::info!(job = %job.id, "identical job exists; pass --force to re-run");
            job
        }
        JobSubmission::Created(job) => {
            run_job(&store, &ctx.models_dir, &job.id)?;
            store.get_job(&job.id)?
        }
    };
    if let Some(path) = &a.out {
        let mut latest: BTreeMap<String, Prediction> = BTreeMap::new();
        for p in store.predictions(Some(job.task), false)? {
            let work = p.passage_id.split(':').next().unwrap_or_default();
            if p.model_id == job.model_id && (job.works.is_empty() || job.works.iter().any(|w| w == work)) {
                latest.insert(p.passage_id.clone(), p);
            }
        }
        let preds: Vec<Prediction> = latest.into_values().collect();
        write_jsonl(path, &preds)?;
        m.output(path);
    }
    finish(ctx, m)?;
    emit(out, &job)
}

// ---- annotate-zeroshot -------------------------------------------------

#[derive(Debug, Serialize)]
struct ZeroShotRow<'a> {
    passage_id: &'a str,
    raw_response: &'a str,
    label: Option<&'a str>,
    parse_ok: bool,
    effective_label: &'a str,
}

fn annotate_zeroshot(ctx: &Context, a: ZeroShotArgs, out: &mut dyn Write) -> CliResult<()> {
    let split = read_dataset(&a.dataset)?;
    if split.task != Task::Detect {
        return Err(Error::Validation(format!("zero-shot annotation is binary; dataset task is {}", split.task)).into());
    }
    let (backend, default_model): (Box<dyn ChatBackend>, Option<&str>) = match a.backend {
        BackendArg::Stub => (Box::new(StubChatBackend), Some("stub")),
        BackendArg::Http => (Box::new(HttpChatBackend::from_env(ctx.file.llm.http_config())?), None),
    };
    let model_name = a
        .llm_model
        .clone()
        .or(ctx.file.llm.model_name.clone().filter(|_| a.backend == BackendArg::Http))
        .or(default_model.map(str::to_string))
        .ok_or_else(|| Error::Config("the http backend needs a model name (--llm-model or llm.model_name)".into()))?;
    let mut classifier = ZeroShotClassifier::new(backend, model_name.clone());
    if let Some(t) = a.temperature {
        classifier = classifier.with_temperature(t);
    }
    let examples: Vec<&LabeledExample> = match a.split {
        SplitArg::Train => split.train.iter().collect(),
        SplitArg::Test => split.test.iter().collect(),
        SplitArg::All => split.train.iter().chain(&split.test).collect(),
    };
    let examples = &examples[..a.limit.unwrap_or(examples.len()).min(examples.len())];
    let mut m = ManifestBuilder::new(
        "annotate-zeroshot",
        json!({
            "backend": format!("{:?}", a.backend).to_lowercase(),
            "model_name": model_name,
            "split": format!("{:?}", a.split).to_lowercase(),
            "limit": a.limit,
            "temperature": a.temperature,
        }),
    );
    m.input(&a.dataset)?;
    let mut records = Vec::with_capacity(examples.len());
    let mut raw = Vec::with_capacity(examples.len());
    for e in examples {
        let r = classifier.classify(&e.text)?;
        if !r.parse_ok {
            tracing::warn!(passage = %e.source_id, reply = %r.raw_response, "ambiguous zero-shot reply counted as nonviolent");
        }
        records.push(EvalRecord {
            passage_id: e.source_id.clone(),
            task: Task::Detect,
            gold: e.label.clone(),
            pred: r.effective_label().to_string(),
        });
        raw.push((e.source_id.as_str(), r));
    }
    let unparsed = raw.iter().filter(|(_, r)| !r.parse_ok).count();
    let safe_name: String = model_name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    let path = a
        .out
        .unwrap_or_else(|| ctx.artifacts_dir.join("zeroshot").join(format!("{safe_name}.records.jsonl")));
    write_jsonl(&path, &records)?;
    let raw_path = path.with_extension("raw.jsonl");
    let rows: Vec<ZeroShotRow> = raw
        .iter()
        .map(|(id, r)| ZeroShotRow {
            passage_id: id,
            raw_response: &r.raw_response,
            label: r.label.as_deref(),
            parse_ok: r.parse_ok,
            effective_label: r.effective_label(),
        })
        .collect();
    write_jsonl(&raw_path, &rows)?;
    m.output(&path);
    m.output(&raw_path);
    let manifest = finish(ctx, m)?;
    emit(
        out,
        &json!({
            "records": path,
            "raw": raw_path,
            "annotated": records.len(),
            "unparsed": unparsed,
            "manifest": manifest,
        }),
    )
}

// ---- serve -------------------------------------------------------------

fn serve(ctx: &Context, a: ServeArgs) -> CliResult<()> {
    let config = ServiceConfig::from_env(ctx.db.clone(), ctx.models_dir.clone(), a.port)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Io { path: "<runtime>".into(), source: e })?;
    let registries = ctx.registries.clone();
    runtime.block_on(polemos_service::serve(config, registries))?;
    Ok(())
}
