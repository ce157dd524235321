//! HTTP API over the next-step predictor.
//!
//! All routes live under `/api/v1`:
//!
//! | route | |
//! |---|---|
//! | `GET /concepts?domain=` | taxonomy listing |
//! | `POST /options` | goal question and paginated concept picker |
//! | `POST /evaluate` | start an evaluation job (202) |
//! | `GET /evaluate/{id}` | poll a job |
//! | `POST /reload` | re-read the configured inputs |
//! | `GET /health` | load status and corpus statistics |

mod error;
mod jobs;
mod options;
mod state;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use nextstep_core::evaluator::evaluate;
use nextstep_core::{Concept, ScoreParams, StepKind};

pub use error::{ApiError, LoadError};
pub use jobs::{EvaluateRequest, JobStatus, JobStore};
pub use options::{
    branch_shares, options, step_concepts, Branch, BranchShare, ConceptOption, ConceptRef,
    OptionsPage, OptionsRequest, StepInput, StepSummary, PAGE_SIZE,
};
pub use state::{KindModels, ServiceConfig, SharedSnapshot, Snapshot, Trained};

#[derive(Debug, Clone)]
pub struct AppState {
    pub snapshot: SharedSnapshot,
    pub jobs: Arc<JobStore>,
    /// Inputs to re-read on reload; `None` disables reloading.
    pub config: Option<ServiceConfig>,
    /// Worker threads per evaluation job.
    pub eval_threads: usize,
}

impl AppState {
    pub fn new(snapshot: Snapshot) -> Self {
        AppState {
            snapshot: SharedSnapshot::new(snapshot),
            jobs: Arc::new(JobStore::default()),
            config: None,
            eval_threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    pub fn from_config(config: ServiceConfig) -> Result<Self, LoadError> {
        let mut state = AppState::new(config.load()?);
        state.config = Some(config);
        Ok(state)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/concepts", get(concepts))
        .route("/api/v1/options", post(options_handler))
        .route("/api/v1/evaluate", post(start_evaluation))
        .route("/api/v1/evaluate/{id}", get(poll_evaluation))
        .route("/api/v1/reload", post(reload))
        .fallback(|| async { ApiError::not_found("no such route") })
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("invalid_request", e.to_string()))
}

async fn health(State(state): State<AppState>) -> impl IntoResponse {
    let snap = state.snapshot.current();
    Json(json!({
        "trained": snap.trained.is_some(),
        "stats": snap.trained.as_ref().map(|t| &t.stats),
        "concepts": {
            "diploma": snap.taxonomies.diploma.len(),
            "job": snap.taxonomies.job.len(),
        },
    }))
}

#[derive(Deserialize)]
struct ConceptsQuery {
    domain: Option<String>,
}

async fn concepts(
    State(state): State<AppState>,
    Query(q): Query<ConceptsQuery>,
) -> Result<Json<Vec<Concept>>, ApiError> {
    let raw = q
        .domain
        .ok_or_else(|| ApiError::bad_request("invalid_domain", "missing domain parameter"))?;
    let domain: StepKind = raw
        .parse()
        .map_err(|_| ApiError::bad_request("invalid_domain", format!("unknown domain {raw:?}")))?;
    let snap = state.snapshot.current();
    Ok(Json(snap.taxonomies.for_kind(domain).concepts().to_vec()))
}

async fn options_handler(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<Json<OptionsPage>, ApiError> {
    let req: OptionsRequest = parse_body(&body)?;
    options(&state.snapshot.current(), &req).map(Json)
}

async fn start_evaluation(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: EvaluateRequest = parse_body(&body)?;
    let params = req.params.unwrap_or_default();
    params
        .validate()
        .map_err(|e| ApiError::bad_request("invalid_params", e.to_string()))?;
    let snap = state.snapshot.current();
    if snap.trained.is_none() {
        return Err(ApiError::no_model());
    }
    let id = state.jobs.start();
    let jobs = state.jobs.clone();
    let threads = state.eval_threads;
    tokio::task::spawn_blocking(move || {
        jobs.finish(id, run_evaluation(&snap, &req, &params, threads));
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "id": id.to_string(), "status": "running" })),
    ))
}

fn run_evaluation(
    snap: &Snapshot,
    req: &EvaluateRequest,
    params: &ScoreParams,
    threads: usize,
) -> JobStatus {
    let trained = snap.trained.as_ref().expect("checked before spawning");
    let tax = snap.taxonomies.for_kind(req.target_kind);
    match evaluate(&trained.corpus, tax, req.method, params, threads) {
        Ok(report) => JobStatus::Done { report },
        Err(e) => JobStatus::Failed {
            message: e.to_string(),
        },
    }
}

async fn poll_evaluation(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let status = id
        .parse::<u64>()
        .ok()
        .and_then(|n| state.jobs.get(n))
        .ok_or_else(|| ApiError::not_found(format!("no evaluation job {id:?}")))?;
    let mut body = serde_json::to_value(&status).expect("job status serializes");
    body["id"] = json!(id);
    Ok(Json(body))
}

async fn reload(State(state): State<AppState>) -> Result<impl IntoResponse, ApiError> {
    let config = state.config.clone().ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "reload_unavailable",
            "service was started without input paths",
        )
    })?;
    let loaded = tokio::task::spawn_blocking(move || config.load())
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "load_failed", e.to_string()))?;
    let users = loaded.trained.as_ref().map_or(0, |t| t.stats.users);
    state.snapshot.replace(loaded);
    Ok(Json(json!({ "reloaded": true, "users": users })))
}
