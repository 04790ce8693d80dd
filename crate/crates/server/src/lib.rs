//! HTTP front end for [`TriageService`].
//!
//! | route            | body / query                                | response                              |
//! |------------------|---------------------------------------------|---------------------------------------|
//! | `POST /classify` | `{title, abstract, backend?}`               | `{predicted, probabilities, entropy}` |
//! | `POST /documents`| corpus lines; `?backend=`                   | `{enqueued, skipped, errors}`         |
//! | `GET /queue`     | `?limit=`                                   | pending items, most uncertain first   |
//! | `POST /feedback` | `{item_id, decision}`                       | the updated item                      |
//! | `POST /retrain`  | `{min_new_labels?}` (body optional)         | `{retrained, linear_version}`         |
//! | `GET /stats`     |                                             | workload counters                     |
//! | `GET /healthz`   |                                             | `{status, model_versions}`            |
//!
//! Errors are `{"error": message}` with status 400 (bad input), 404 (unknown
//! item), 409 (already resolved), 503 (no model loaded or embedding provider
//! unavailable) or 500.

mod config;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use ebm_triage::ingest::parse_corpus_str;
use ebm_triage::triage::{Backend, Decision, ModelVersions, TriageError, TriageService};
use ebm_triage::PredictionResult;

pub use config::{build_service, ConfigError, ServerConfig};

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<TriageService>,
    pub default_backend: Backend,
    pub default_queue_limit: usize,
    /// Run [`TriageService::maybe_retrain`] in the background after each
    /// piece of feedback.
    pub auto_retrain: bool,
}

impl AppState {
    pub fn new(service: Arc<TriageService>) -> Self {
        AppState {
            service,
            default_backend: Backend::Forest,
            default_queue_limit: 50,
            auto_retrain: false,
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/classify", post(classify))
        .route("/documents", post(documents))
        .route("/queue", get(queue))
        .route("/feedback", post(feedback))
        .route("/retrain", post(retrain))
        .route("/stats", get(stats))
        .route("/healthz", get(healthz))
        .with_state(state)
}

/// Serve `router` on `config.bind` until Ctrl-C.
pub async fn run(config: ServerConfig) -> Result<(), ConfigError> {
    let service = tokio::task::spawn_blocking({
        let config = config.clone();
        move || build_service(&config)
    })
    .await
    .expect("service construction panicked")?;
    let state = AppState {
        service: Arc::new(service),
        default_backend: config.default_backend,
        default_queue_limit: config.queue_limit,
        auto_retrain: config.auto_retrain,
    };
    let listener = tokio::net::TcpListener::bind(&config.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<TriageError> for ApiError {
    fn from(err: TriageError) -> Self {
        let status = match &err {
            TriageError::NoModelLoaded(_) | TriageError::Embed(_) => StatusCode::SERVICE_UNAVAILABLE,
            TriageError::UnknownItem(_) => StatusCode::NOT_FOUND,
            TriageError::AlreadyResolved(_) | TriageError::DuplicateItem(_) => StatusCode::CONFLICT,
            TriageError::CorrectToSameLabel(..) | TriageError::NoTrainingData => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            message: err.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Run blocking service work (model inference, embedding calls, fsync)
/// off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, TriageError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("worker failed: {e}"),
        })?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
struct ClassifyRequest {
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    #[serde(default)]
    backend: Option<Backend>,
}

async fn classify(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<Json<PredictionResult>, ApiError> {
    let req: ClassifyRequest = parse_body(&body)?;
    let backend = req.backend.unwrap_or(state.default_backend);
    let service = state.service.clone();
    let result =
        blocking(move || service.classify(&req.title, &req.abstract_text, backend)).await?;
    Ok(Json(result))
}

#[derive(Deserialize)]
struct DocumentsQuery {
    backend: Option<Backend>,
}

#[derive(Serialize)]
struct LineError {
    line: usize,
    kind: String,
    reason: String,
}

async fn documents(
    State(state): State<AppState>,
    Query(query): Query<DocumentsQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(&body)
        .map_err(|e| ApiError::bad_request(format!("body is not UTF-8: {e}")))?;
    let parsed = parse_corpus_str(text);
    let errors: Vec<LineError> = parsed
        .errors
        .iter()
        .map(|e| LineError {
            line: e.line,
            kind: e.kind.to_string(),
            reason: e.reason.clone(),
        })
        .collect();
    if parsed.records.is_empty() {
        let status = StatusCode::BAD_REQUEST;
        let message = if errors.is_empty() { "no documents in body" } else { "no valid documents in body" };
        return Ok((status, Json(json!({ "error": message, "errors": errors }))).into_response());
    }
    let submitted = parsed.records.len();
    let backend = query.backend.unwrap_or(state.default_backend);
    let service = state.service.clone();
    let records = parsed.records;
    let enqueued = blocking(move || service.enqueue(records, backend)).await?;
    Ok(Json(json!({
        "enqueued": enqueued.len(),
        "skipped": submitted - enqueued.len(),
        "errors": errors,
    }))
    .into_response())
}

#[derive(Deserialize)]
struct QueueQuery {
    limit: Option<usize>,
}

async fn queue(
    State(state): State<AppState>,
    Query(query): Query<QueueQuery>,
) -> Response {
    let limit = query.limit.unwrap_or(state.default_queue_limit);
    Json(state.service.queue(limit)).into_response()
}

#[derive(Deserialize)]
struct FeedbackRequest {
    item_id: String,
    decision: Decision,
}

async fn feedback(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: FeedbackRequest = parse_body(&body)?;
    let service = state.service.clone();
    let item = blocking(move || service.record_feedback(&req.item_id, req.decision)).await?;
    if state.auto_retrain {
        let service = state.service.clone();
        tokio::task::spawn_blocking(move || {
            if let Err(e) = service.maybe_retrain() {
                log::error!("background retrain failed: {e}");
            }
        });
    }
    Ok(Json(item).into_response())
}

#[derive(Deserialize, Default)]
struct RetrainRequest {
    min_new_labels: Option<usize>,
}

async fn retrain(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: RetrainRequest = if body.iter().all(u8::is_ascii_whitespace) {
        RetrainRequest::default()
    } else {
        parse_body(&body)?
    };
    let service = state.service.clone();
    let min = req
        .min_new_labels
        .unwrap_or(service.config().min_new_labels);
    let svc = service.clone();
    let model = blocking(move || svc.retrain_from_feedback(min)).await?;
    Ok(Json(json!({
        "retrained": model.is_some(),
        "linear_version": service.model_versions().linear,
    }))
    .into_response())
}

async fn stats(State(state): State<AppState>) -> Response {
    Json(state.service.stats()).into_response()
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    model_versions: ModelVersions,
}

async fn healthz(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok",
        model_versions: state.service.model_versions(),
    })
}
