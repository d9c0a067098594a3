//! Single in-process job worker.
//!
//! Jobs are processed one at a time in submission order. Predictions are
//! written batch by batch so they reach the review queue while a job is
//! still running.

use std::path::PathBuf;
use std::sync::Arc;

use polemos_core::models::{predict, ModelHandle};
use polemos_core::store::{AnnotationJob, JobStatus, Store};
use polemos_core::Result;
use tokio::sync::mpsc;

/// Passages scored and persisted per step.
pub const BATCH: usize = 64;

#[derive(Clone)]
pub struct JobQueue {
    tx: mpsc::UnboundedSender<String>,
}

impl JobQueue {
    /// Starts the worker thread. It exits when every queue handle is dropped.
    pub fn start(store: Arc<Store>, models_dir: PathBuf) -> Self {
        let (tx, mut rx) = mpsc::unbounded_channel::<String>();
        std::thread::Builder::new()
            .name("polemos-job-worker".into())
            .spawn(move || {
                while let Some(id) = rx.blocking_recv() {
                    if let Err(err) = run_job(&store, &models_dir, &id) {
                        tracing::error!(job = %id, error = %err, "job failed");
                        fail(&store, &id, &err.to_string());
                    }
                }
            })
            .expect("spawn job worker");
        Self { tx }
    }

    pub fn submit(&self, job_id: String) -> bool {
        self.tx.send(job_id).is_ok()
    }
}

fn fail(store: &Store, id: &str, message: &str) {
    if let Ok(mut job) = store.get_job(id) {
        if !job.status.is_terminal() {
            job.status = JobStatus::Failed;
            job.error = Some(message.to_string());
            if let Err(e) = store.put_job(&job) {
                tracing::error!(job = %id, error = %e, "could not record job failure");
            }
        }
    }
}

pub fn run_job(store: &Store, models_dir: &std::path::Path, id: &str) -> Result<()> {
    let mut job: AnnotationJob = store.get_job(id)?;
    if job.status != JobStatus::Queued {
        return Ok(());
    }
    job.status = JobStatus::Running;
    store.put_job(&job)?;
    tracing::info!(job = %id, task = %job.task, model = %job.model_id, "job started");

    let model = ModelHandle::load_by_id(models_dir, &job.model_id)?;
    let filter = (!job.works.is_empty()).then_some(job.works.as_slice());
    let passages = store.passages(filter)?;
    job.total = passages.len();
    for chunk in passages.chunks(BATCH) {
        let preds = predict(&model, chunk)?;
        store.put_predictions(&preds)?;
        for p in &preds {
            *job.counts.entry(p.label.clone()).or_default() += 1;
        }
        job.processed += preds.len();
        store.put_job(&job)?;
    }
    job.status = JobStatus::Done;
    store.put_job(&job)?;
    tracing::info!(job = %id, processed = job.processed, "job done");
    Ok(())
}
