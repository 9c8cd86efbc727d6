use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use toonbench_core::concordance::TiePolicy;
use tower_http::services::ServeDir;

use crate::session::{ReviewError, ReviewSession};

const FALLBACK_PAGE: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>toonbench review</title></head>\n<body><h1>toonbench review</h1>\n<p>No UI directory configured. API: <code>GET /api/task?annotator=ID</code>, <code>POST /api/ranking</code>, <code>GET /api/asset/{handle}</code>, <code>GET /api/concordance</code>.</p>\n</body></html>\n";

#[derive(Debug, Deserialize)]
pub struct TaskQuery {
    pub annotator: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankingSubmission {
    pub annotator_id: String,
    pub image_id: String,
    pub ordered_blind_labels: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct ConcordanceQuery {
    #[serde(default)]
    pub ties: Option<String>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

struct ApiError(ReviewError);

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            ReviewError::EmptyAnnotator | ReviewError::LabelMismatch { .. } => StatusCode::BAD_REQUEST,
            ReviewError::UnknownTask(_) | ReviewError::UnknownHandle => StatusCode::NOT_FOUND,
            ReviewError::DuplicateSubmission { .. } => StatusCode::CONFLICT,
            ReviewError::SessionNotInitialized(_) => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorBody {
            error: self.0.kind(),
            message: self.0.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

fn bad_request(message: String) -> Response {
    let body = ErrorBody {
        error: "BadRequest",
        message,
    };
    (StatusCode::BAD_REQUEST, Json(body)).into_response()
}

async fn blocking<T, F>(session: Arc<ReviewSession>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&ReviewSession) -> Result<T, ReviewError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&session))
        .await
        .map_err(|e| ApiError(ReviewError::Asset(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

async fn task(State(session): State<Arc<ReviewSession>>, Query(q): Query<TaskQuery>) -> Result<Response, ApiError> {
    let out = blocking(session, move |s| s.next_task(&q.annotator)).await?;
    Ok(Json(out).into_response())
}

async fn ranking(State(session): State<Arc<ReviewSession>>, Json(body): Json<RankingSubmission>) -> Result<Response, ApiError> {
    let ack = blocking(session, move |s| {
        s.submit_ranking(&body.annotator_id, &body.image_id, &body.ordered_blind_labels)
    })
    .await?;
    Ok(Json(ack).into_response())
}

async fn asset(State(session): State<Arc<ReviewSession>>, Path(handle): Path<String>) -> Result<Response, ApiError> {
    let png = blocking(session, move |s| s.serve_asset(&handle)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn concordance(
    State(session): State<Arc<ReviewSession>>,
    Query(q): Query<ConcordanceQuery>,
) -> Result<Response, ApiError> {
    let policy = match q.ties.as_deref() {
        None => TiePolicy::default(),
        Some(s) => match s.parse::<TiePolicy>() {
            Ok(p) => p,
            Err(e) => return Ok(bad_request(e.to_string())),
        },
    };
    let report = blocking(session, move |s| s.concordance(policy)).await?;
    Ok(Json(report).into_response())
}

/// API routes plus the UI: files from `ui_dir` when given, otherwise a
/// placeholder page at `/`.
pub fn router(session: Arc<ReviewSession>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/task", get(task))
        .route("/api/ranking", post(ranking))
        .route("/api/asset/{handle}", get(asset))
        .route("/api/concordance", get(concordance))
        .with_state(session);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(FALLBACK_PAGE) })),
    }
}

pub async fn serve(session: Arc<ReviewSession>, ui_dir: Option<PathBuf>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(session, ui_dir)).await
}
