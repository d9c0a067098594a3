//! HTTP service over the corpus store: annotation jobs, the uncertainty-
//! ordered review queue, reviewer verdicts and feedback export.
//!
//! Every endpoint speaks JSON except `/export/feedback`, which streams
//! JSONL. When a token is configured, every route except `/health`
//! requires `Authorization: Bearer <token>`.

pub mod error;
pub mod worker;

use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use polemos_core::dataset::{LabelInfo, Registries, Task};
use polemos_core::models::ModelHandle;
use polemos_core::store::{
    AnnotationJob, Decision, JobStatus, Passage, ReviewItem, ReviewVerdict, Store, VerdictInput,
};
use serde::{Deserialize, Serialize};

pub use error::{ApiError, ApiResult};
pub use worker::JobQueue;

/// Environment variable holding the bearer token; unset or empty disables auth.
pub const TOKEN_ENV: &str = "POLEMOS_SERVICE_TOKEN";
/// Environment variable holding the listen port.
pub const PORT_ENV: &str = "POLEMOS_PORT";
pub const DEFAULT_PORT: u16 = 8750;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub db_path: PathBuf,
    pub models_dir: PathBuf,
    pub token: Option<String>,
    pub addr: SocketAddr,
}

impl ServiceConfig {
    /// Reads token and port from the environment. An explicit `port`
    /// overrides the environment.
    pub fn from_env(db_path: PathBuf, models_dir: PathBuf, port: Option<u16>) -> polemos_core::Result<Self> {
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.trim().is_empty());
        let port = match port {
            Some(p) => p,
            None => match std::env::var(PORT_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| {
                    polemos_core::Error::Config(format!("{PORT_ENV}={v:?} is not a port number"))
                })?,
                Err(_) => DEFAULT_PORT,
            },
        };
        Ok(Self {
            db_path,
            models_dir,
            token,
            addr: SocketAddr::from(([127, 0, 0, 1], port)),
        })
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub models_dir: PathBuf,
    pub token: Option<String>,
    pub jobs: JobQueue,
}

impl AppState {
    /// Wraps a store and starts the job worker.
    pub fn new(store: Arc<Store>, models_dir: PathBuf, token: Option<String>) -> Self {
        let jobs = JobQueue::start(store.clone(), models_dir.clone());
        Self {
            store,
            models_dir,
            token,
            jobs,
        }
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/jobs", post(create_job))
        .route("/jobs/:id", get(get_job))
        .route("/review/queue", get(review_queue))
        .route("/review/progress", get(review_progress))
        .route("/review/:prediction_id/verdict", post(post_verdict))
        .route("/export/feedback", get(export_feedback))
        .route("/passages/:id", get(get_passage))
        .route("/registries/:task", get(get_registry))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/health", get(|| async { Json(serde_json::json!({ "status": "ok" })) }))
        .merge(api)
        .with_state(state)
}

/// Opens the store, starts the worker and serves until the process ends.
pub async fn serve(config: ServiceConfig, registries: Registries) -> polemos_core::Result<()> {
    let store = Arc::new(Store::open(&config.db_path, registries)?);
    let state = AppState::new(store, config.models_dir.clone(), config.token.clone());
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|e| polemos_core::Error::Config(format!("cannot bind {}: {e}", config.addr)))?;
    tracing::info!(addr = %config.addr, auth = config.token.is_some(), "review service listening");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| polemos_core::Error::Config(format!("server stopped: {e}")))
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(expected) = &state.token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .unwrap_or("");
        if !constant_time_eq(given.as_bytes(), expected.as_bytes()) {
            return ApiError::unauthorized().into_response();
        }
    }
    next.run(req).await
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Runs blocking store work off the async executor.
async fn blocking<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> ApiResult<T> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

// ---- jobs ------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobRequest {
    pub task: Task,
    pub model_id: String,
    /// Work ids to annotate; empty or absent means every work.
    #[serde(default)]
    pub works: Vec<String>,
    /// Start a new job even if one exists for the same task, model and works.
    #[serde(default)]
    pub force: bool,
}

/// Outcome of [`plan_job`].
#[derive(Debug, Clone, PartialEq)]
pub enum JobSubmission {
    /// A job with the same task, model and works already exists.
    Existing(AnnotationJob),
    /// A new queued job was recorded and must be handed to a worker.
    Created(AnnotationJob),
}

/// Validates a job request and records a queued job unless an equivalent
/// one exists and `force` is off.
///
/// Fails with `NotFound` for an unknown model, `Validation` when the model
/// was trained for another task and `Config` when no passage matches.
pub fn plan_job(store: &Store, models_dir: &std::path::Path, req: &JobRequest) -> polemos_core::Result<JobSubmission> {
    let model = ModelHandle::load_by_id(models_dir, &req.model_id)?;
    if model.task() != req.task {
        return Err(polemos_core::Error::Validation(format!(
            "model {} is a {} model, not {}",
            req.model_id,
            model.task(),
            req.task
        )));
    }
    let mut works = req.works.clone();
    works.sort();
    works.dedup();
    if !req.force {
        if let Some(job) = store.find_job(req.task, &req.model_id, &works)? {
            return Ok(JobSubmission::Existing(job));
        }
    }
    let filter = (!works.is_empty()).then_some(works.as_slice());
    let total = store.passages(filter)?.len();
    if total == 0 {
        return Err(polemos_core::Error::Config(format!("no passages match works {works:?}")));
    }
    let job = AnnotationJob {
        id: uuid::Uuid::new_v4().to_string(),
        task: req.task,
        model_id: req.model_id.clone(),
        works,
        status: JobStatus::Queued,
        total,
        processed: 0,
        counts: Default::default(),
        error: None,
        created_at: Utc::now(),
    };
    store.put_job(&job)?;
    Ok(JobSubmission::Created(job))
}

async fn create_job(
    State(state): State<AppState>,
    body: Result<Json<JobRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<AnnotationJob>)> {
    let Json(req) = body?;
    let submission = blocking(&state, move |s| Ok(plan_job(&s.store, &s.models_dir, &req)?)).await?;
    match submission {
        JobSubmission::Existing(job) => Ok((StatusCode::OK, Json(job))),
        JobSubmission::Created(job) => {
            if !state.jobs.submit(job.id.clone()) {
                return Err(ApiError::new(
                    StatusCode::SERVICE_UNAVAILABLE,
                    "unavailable",
                    "job worker has stopped",
                ));
            }
            Ok((StatusCode::ACCEPTED, Json(job)))
        }
    }
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<AnnotationJob>> {
    blocking(&state, move |s| Ok(Json(s.store.get_job(&id)?))).await
}

// ---- review ----------------------------------------------------------

#[derive(Debug, Deserialize)]
pub struct QueueQuery {
    pub task: Option<Task>,
    pub status: Option<String>,
    pub limit: Option<usize>,
}

async fn review_queue(
    State(state): State<AppState>,
    query: Result<Query<QueueQuery>, QueryRejection>,
) -> ApiResult<Json<Vec<ReviewItem>>> {
    let Query(q) = query?;
    if let Some(s) = q.status.as_deref() {
        if s != "pending" {
            return Err(ApiError::bad_request(format!(
                "unsupported status {s:?}; only \"pending\" is served"
            )));
        }
    }
    blocking(&state, move |s| {
        let mut items = s.store.review_queue(q.task)?;
        if let Some(n) = q.limit {
            items.truncate(n);
        }
        Ok(Json(items))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct TaskQuery {
    pub task: Option<Task>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub pending: usize,
    pub reviewed: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub relabeled: usize,
}

async fn review_progress(
    State(state): State<AppState>,
    query: Result<Query<TaskQuery>, QueryRejection>,
) -> ApiResult<Json<Progress>> {
    let Query(q) = query?;
    blocking(&state, move |s| {
        let pending = s.store.predictions(q.task, true)?.len();
        let verdicts = s.store.verdicts(q.task)?;
        let count = |d: Decision| verdicts.iter().filter(|(v, _)| v.decision == d).count();
        Ok(Json(Progress {
            pending,
            reviewed: verdicts.len(),
            accepted: count(Decision::Accept),
            rejected: count(Decision::Reject),
            relabeled: count(Decision::Relabel),
        }))
    })
    .await
}

/// Verdict body; the prediction id comes from the path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictRequest {
    pub decision: Decision,
    #[serde(default)]
    pub corrected_label: Option<String>,
    pub reviewer: String,
}

async fn post_verdict(
    State(state): State<AppState>,
    Path(prediction_id): Path<String>,
    body: Result<Json<VerdictRequest>, JsonRejection>,
) -> ApiResult<Json<ReviewVerdict>> {
    let Json(req) = body?;
    blocking(&state, move |s| {
        let input = VerdictInput {
            prediction_id,
            decision: req.decision,
            corrected_label: req.corrected_label,
            reviewer: req.reviewer,
        };
        Ok(Json(s.store.record_verdict(&input)?))
    })
    .await
}

async fn export_feedback(
    State(state): State<AppState>,
    query: Result<Query<TaskQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query?;
    let examples = blocking(&state, move |s| Ok(s.store.export_feedback(q.task)?)).await?;
    let lines = examples.into_iter().map(|ex| {
        let mut line = serde_json::to_string(&ex).expect("examples serialize");
        line.push('\n');
        Ok::<_, Infallible>(line)
    });
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        Body::from_stream(futures_util::stream::iter(lines)),
    )
        .into_response())
}

// ---- passages and registries -------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassageView {
    #[serde(flatten)]
    pub passage: Passage,
    pub citation: String,
}

async fn get_passage(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<PassageView>> {
    blocking(&state, move |s| {
        let passage = s.store.get_passage(&id)?;
        Ok(Json(PassageView {
            citation: passage.source.to_string(),
            passage,
        }))
    })
    .await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistryView {
    pub task: Task,
    /// Registry order, with the description shown as a tooltip.
    pub labels: Vec<LabelInfo>,
}

async fn get_registry(State(state): State<AppState>, Path(task): Path<String>) -> ApiResult<Json<RegistryView>> {
    let task: Task = task.parse()?;
    let labels = state.store.registries().get(task).infos().to_vec();
    Ok(Json(RegistryView { task, labels }))
}
