//! JSON over HTTP on top of [`Registry`].
//!
//! | method | path | body / query |
//! |---|---|---|
//! | POST | `/api/sessions` | `{"path": ...}` or `{"document": ...}` |
//! | GET | `/api/sessions/{id}/front` | |
//! | POST | `/api/sessions/{id}/runs` | [`RunRequest`] |
//! | GET | `/api/sessions/{id}/runs/{rid}/trace` | `?since=N` |
//! | POST | `/api/sessions/{id}/runs/{rid}/stop` | |
//! | GET | `/api/sessions/{id}/runs/{rid}/export` | `?format=front_csv\|run_log\|plan_json` |

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use crate::error::{ErrorCode, ServiceError};
use crate::registry::{ExportFormat, InstanceSource, Registry};
use crate::request::RunRequest;

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            Self::UnknownSession | Self::UnknownRun => StatusCode::NOT_FOUND,
            Self::InvalidInstance | Self::InvalidRequest | Self::MissingReferencePoint => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Self::UnknownFormat => StatusCode::BAD_REQUEST,
            Self::RunLimit => StatusCode::TOO_MANY_REQUESTS,
            Self::RunActive | Self::NoPreferredSolution => StatusCode::CONFLICT,
            Self::Storage => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<JsonRejection> for ServiceError {
    fn from(rejection: JsonRejection) -> Self {
        ServiceError::new(ErrorCode::InvalidRequest, rejection.body_text())
    }
}

impl From<QueryRejection> for ServiceError {
    fn from(rejection: QueryRejection) -> Self {
        ServiceError::new(ErrorCode::InvalidRequest, rejection.body_text())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub document: Option<String>,
}

#[derive(Debug, Deserialize)]
struct TraceQuery {
    #[serde(default)]
    since: u64,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: String,
}

type Shared = State<Arc<Registry>>;

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/front", get(front))
        .route("/api/sessions/{id}/runs", post(start_run))
        .route("/api/sessions/{id}/runs/{rid}/trace", get(trace))
        .route("/api/sessions/{id}/runs/{rid}/stop", post(stop))
        .route("/api/sessions/{id}/runs/{rid}/export", get(export))
        .fallback(|| async { ServiceError::new(ErrorCode::InvalidRequest, "no such endpoint").with_status(StatusCode::NOT_FOUND) })
        .with_state(registry)
}

impl ServiceError {
    fn with_status(self, status: StatusCode) -> Response {
        (status, Json(self)).into_response()
    }
}

/// Runs blocking registry work off the async workers.
async fn blocking<T: Send + 'static>(
    work: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(work)
        .await
        .unwrap_or_else(|e| Err(ServiceError::storage(e)))
}

async fn create_session(
    State(registry): Shared,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let Json(body) = body?;
    let source = match (body.path, body.document) {
        (Some(path), None) => InstanceSource::Path(path),
        (None, Some(document)) => InstanceSource::Document(document),
        _ => return Err(ServiceError::invalid("path", "give exactly one of path and document")),
    };
    let summary = blocking(move || registry.create_session(source)).await?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn front(State(registry): Shared, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(registry.session(&id)?.summary()).into_response())
}

async fn start_run(
    State(registry): Shared,
    Path(id): Path<String>,
    body: Result<Json<RunRequest>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let Json(request) = body?;
    let ack = registry.start_run(&id, &request)?;
    Ok((StatusCode::ACCEPTED, Json(ack)).into_response())
}

async fn trace(
    State(registry): Shared,
    Path((id, rid)): Path<(String, String)>,
    query: Result<Query<TraceQuery>, QueryRejection>,
) -> Result<Response, ServiceError> {
    let Query(query) = query?;
    Ok(Json(registry.poll_trace(&id, &rid, query.since)?).into_response())
}

async fn stop(State(registry): Shared, Path((id, rid)): Path<(String, String)>) -> Result<Response, ServiceError> {
    let ack = blocking(move || registry.stop_run(&id, &rid)).await?;
    Ok(Json(ack).into_response())
}

async fn export(
    State(registry): Shared,
    Path((id, rid)): Path<(String, String)>,
    query: Result<Query<ExportQuery>, QueryRejection>,
) -> Result<Response, ServiceError> {
    let Query(query) = query?;
    let format = ExportFormat::parse(&query.format)?;
    let body = blocking(move || registry.export(&id, &rid, format)).await?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], body).into_response())
}

/// Serves until Ctrl-C.
pub async fn serve(registry: Arc<Registry>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(registry))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
