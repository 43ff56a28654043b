use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cyents::annotations::AnnotationLine;
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::service::AnnotationService;
use crate::ServiceError;

pub const TOKEN_HEADER: &str = "x-annotator-token";

type Shared = Arc<AnnotationService>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            ServiceError::UnknownAnnotator(_) => (StatusCode::NOT_FOUND, "UnknownAnnotator"),
            ServiceError::UnknownDoc(_) => (StatusCode::NOT_FOUND, "UnknownDoc"),
            ServiceError::UnknownGroup(_) => (StatusCode::NOT_FOUND, "UnknownGroup"),
            ServiceError::NotAssigned { .. } => (StatusCode::CONFLICT, "NotAssigned"),
            ServiceError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "ValidationError"),
            ServiceError::InsufficientData(_) => (StatusCode::CONFLICT, "InsufficientData"),
            ServiceError::Unauthorized(_) => (StatusCode::UNAUTHORIZED, "Unauthorized"),
            ServiceError::Config(_) | ServiceError::Persist(_) => (StatusCode::INTERNAL_SERVER_ERROR, "Internal"),
        };
        let mut body = json!({ "error": kind, "message": self.to_string() });
        if let ServiceError::Validation(issues) = &self {
            body["spans"] = json!(issues);
        }
        (status, Json(body)).into_response()
    }
}

fn token(headers: &HeaderMap) -> Option<&str> {
    headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok())
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
}

#[derive(Deserialize)]
struct IaaQuery {
    group: String,
}

async fn schema(State(s): State<Shared>) -> impl IntoResponse {
    Json(s.schema())
}

async fn next_task(
    State(s): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<NextQuery>,
) -> Result<impl IntoResponse, ServiceError> {
    s.authorize(&q.annotator, token(&headers))?;
    Ok(Json(s.next_task(&q.annotator)?))
}

async fn document(State(s): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(s.document(&id)?.clone()))
}

async fn submit(
    State(s): State<Shared>,
    headers: HeaderMap,
    Json(line): Json<AnnotationLine>,
) -> Result<impl IntoResponse, ServiceError> {
    s.authorize(&line.annotator, token(&headers))?;
    let s2 = s.clone();
    // file writes happen under the writer lock; keep them off the reactor
    let ack = tokio::task::spawn_blocking(move || s2.submit(line))
        .await
        .map_err(|e| ServiceError::Persist(e.to_string()))??;
    Ok(Json(ack))
}

async fn iaa(State(s): State<Shared>, Query(q): Query<IaaQuery>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(s.iaa_status(&q.group)?))
}

/// The JSON API, plus the static UI bundle at `/` when `ui_dir` is given.
pub fn router(service: Shared, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/schema", get(schema))
        .route("/api/tasks/next", get(next_task))
        .route("/api/docs/:doc_id", get(document))
        .route("/api/annotations", post(submit))
        .route("/api/iaa", get(iaa))
        .with_state(service);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(service: Shared, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service, ui_dir)).await
}
