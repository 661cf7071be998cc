//! Gateway scan service: a long-running HTTP endpoint serving verdicts from
//! a shared immutable model.
//!
//! `POST /scan` takes the raw binary as the request body (optional
//! `X-Filename` header) and always answers 200 with a verdict document when
//! the scan ran — a file that fails to parse is a routable decision
//! (`label = "error"`), not a server error. Oversized bodies get 413.
//! `GET /health` reports readiness and the scan counter; `GET /model/info`
//! reports training provenance and hyperparameters. Scanned bytes are never
//! persisted.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Json};
use axum::routing::{get, post};
use axum::Router;
use serde_json::json;
use thiserror::Error;

use crate::classifiers::{ClassifierError, TrainedModel};
use crate::scan::Scanner;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("model load failure: {0}")]
    ModelLoadFailure(#[from] ClassifierError),
    #[error("bind failure on {addr}: {source}")]
    BindFailure {
        addr: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub struct AppState {
    pub scanner: Scanner,
    pub scans_served: AtomicU64,
    pub ready: AtomicBool,
}

impl AppState {
    pub fn new(scanner: Scanner) -> Arc<Self> {
        Arc::new(Self {
            scanner,
            scans_served: AtomicU64::new(0),
            ready: AtomicBool::new(false),
        })
    }
}

pub fn build_router(state: Arc<AppState>) -> Router {
    let max_body = crate::pe::ParserLimits::from_env().max_input_bytes as usize;
    Router::new()
        .route("/scan", post(scan_handler))
        .route("/health", get(health_handler))
        .route("/model/info", get(model_info_handler))
        .layer(DefaultBodyLimit::max(max_body))
        .with_state(state)
}

async fn scan_handler(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> impl IntoResponse {
    let source_name = headers
        .get("x-filename")
        .and_then(|v| v.to_str().ok())
        .unwrap_or("upload")
        .to_string();
    let verdict = state.scanner.scan_bytes(&body, &source_name);
    state.scans_served.fetch_add(1, Ordering::Relaxed);
    Json(verdict)
}

async fn health_handler(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    if !state.ready.load(Ordering::Acquire) {
        return (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "status": "starting" })),
        );
    }
    (
        StatusCode::OK,
        Json(json!({
            "status": "ok",
            "model_version": state.scanner.model_version(),
            "scans_served": state.scans_served.load(Ordering::Relaxed),
        })),
    )
}

async fn model_info_handler(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    let mf = state.scanner.model_file();
    let (kind, hyperparameters, retained) = match &mf.model {
        TrainedModel::Forest(f) => (
            "forest",
            serde_json::to_value(&f.config).unwrap_or_default(),
            f.retained_features.len(),
        ),
        TrainedModel::DecisionTree(_) => ("decision_tree", json!({}), mf.vocabulary.len()),
        TrainedModel::NaiveBayes(nb) => ("naive_bayes", json!({}), nb.features.len()),
    };
    Json(json!({
        "model_version": mf.model_version,
        "kind": kind,
        "provenance": mf.provenance,
        "hyperparameters": hyperparameters,
        "vocabulary_size": mf.vocabulary.len(),
        "retained_feature_count": retained,
    }))
}

/// Bind, mark ready, and serve until `shutdown` resolves. In-flight scans
/// complete before return.
pub async fn serve_with_shutdown(
    state: Arc<AppState>,
    bind_addr: SocketAddr,
    ready_tx: Option<tokio::sync::oneshot::Sender<SocketAddr>>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(bind_addr)
        .await
        .map_err(|source| ServiceError::BindFailure {
            addr: bind_addr.to_string(),
            source,
        })?;
    let local = listener.local_addr()?;
    state.ready.store(true, Ordering::Release);
    if let Some(tx) = ready_tx {
        let _ = tx.send(local);
    }
    axum::serve(listener, build_router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Blocking entry point: load the model (refusing to start on checksum or
/// format failure), bind, and run until SIGINT.
pub fn serve(model_path: &Path, bind_addr: SocketAddr) -> Result<(), ServiceError> {
    let scanner = Scanner::from_file(model_path)?;
    let state = AppState::new(scanner);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(serve_with_shutdown(state, bind_addr, None, async {
        let _ = tokio::signal::ctrl_c().await;
    }))
}
