//! HTTP routes.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ddemph_core::evalstats::TestType;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::ServiceError;
use crate::plan::TestPlan;
use crate::store::{Payload, TestService};

#[derive(Debug, Deserialize)]
struct SessionQuery {
    listener: String,
}

#[derive(Debug, Deserialize)]
struct ScreenQuery {
    session: String,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: Option<String>,
}

/// Body of `POST /api/response`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSubmission {
    pub session_id: String,
    pub index: usize,
    pub payload: Payload,
}

const FALLBACK_INDEX: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>Listening test</title></head>\
<body><p>No client assets are installed. The test API is served under <code>/api</code>.</p></body></html>\n";

async fn session(
    State(svc): State<Arc<TestService>>,
    Query(q): Query<SessionQuery>,
) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(svc.create_session(&q.listener)?))
}

async fn screen(
    State(svc): State<Arc<TestService>>,
    Path(index): Path<usize>,
    Query(q): Query<ScreenQuery>,
) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(svc.screen(&q.session, index)?))
}

async fn audio(State(svc): State<Arc<TestService>>, Path(file): Path<String>) -> Result<Response, ServiceError> {
    let id = file
        .strip_suffix(".wav")
        .ok_or_else(|| ServiceError::NotFound(file.clone()))?;
    let stimulus = svc
        .plan()
        .stimulus(id)
        .ok_or_else(|| ServiceError::NotFound(file.clone()))?;
    let bytes = tokio::fs::read(&stimulus.path).await?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], Body::from(bytes)).into_response())
}

async fn response(
    State(svc): State<Arc<TestService>>,
    body: Result<Json<ResponseSubmission>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Json(sub) = body.map_err(|e| ServiceError::InvalidPayload(e.body_text()))?;
    // fsync happens inside; keep it off the async workers
    let ack = tokio::task::spawn_blocking(move || svc.record_response(&sub.session_id, sub.index, sub.payload))
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))??;
    Ok((StatusCode::CREATED, Json(ack)))
}

async fn export(
    State(svc): State<Arc<TestService>>,
    Path(test_type): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ServiceError> {
    let t = TestType::parse(&test_type).ok_or_else(|| ServiceError::WrongTestType(test_type.clone()))?;
    let export = svc.export(t)?;
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(export).into_response()),
        Some("jsonl") => Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], export.to_jsonl()).into_response()),
        Some(other) => Err(ServiceError::InvalidPayload(format!("unknown export format {other:?}"))),
    }
}

async fn api_not_found() -> ServiceError {
    ServiceError::NotFound("no such endpoint".into())
}

/// Builds the router; `static_dir` holds the client assets served at `/`.
pub fn router(service: Arc<TestService>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/session", get(session))
        .route("/api/screen/{index}", get(screen))
        .route("/api/response", post(response))
        .route("/api/export/{test_type}", get(export))
        .route("/api/{*rest}", get(api_not_found).post(api_not_found))
        .route("/audio/{file}", get(audio))
        .with_state(service);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(FALLBACK_INDEX) })),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub plan: PathBuf,
    pub log: PathBuf,
    pub static_dir: Option<PathBuf>,
    pub addr: SocketAddr,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            plan: PathBuf::from("plan.json"),
            log: PathBuf::from("responses.jsonl"),
            static_dir: None,
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
        }
    }
}

/// Loads the plan and log named in `config`.
pub fn open_service(config: &ServeConfig) -> Result<TestService, ServiceError> {
    let text = std::fs::read_to_string(&config.plan)?;
    let base = config.plan.parent().map(PathBuf::from).unwrap_or_default();
    let plan = TestPlan::from_json(&text)?.load(&base)?;
    TestService::open(plan, &config.log)
}

/// Serves until the process is stopped.
pub async fn serve(config: ServeConfig) -> Result<(), ServiceError> {
    let service = Arc::new(open_service(&config)?);
    let app = router(service, config.static_dir.clone());
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    axum::serve(listener, app).await?;
    Ok(())
}
