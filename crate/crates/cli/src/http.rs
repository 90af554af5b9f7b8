//! HTTP/JSON session API.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use nudge_core::service::{CreateSession, OrderRequest, SessionManager};
use nudge_core::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::error_json;

pub fn status_for(err: &Error) -> StatusCode {
    match err {
        Error::Conflict(_) | Error::State(_) | Error::MissingArtifacts(_) => StatusCode::CONFLICT,
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::Parameter { .. } | Error::Protocol(_) | Error::Json(_) | Error::Contract(_) | Error::Reference(_) | Error::Index(_) => {
            StatusCode::BAD_REQUEST
        }
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (status_for(&self.0), Json(error_json(&self.0))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Parses a request body ourselves so malformed JSON gets the same error
/// shape as every other failure. An empty body reads as `{}`.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(text).map_err(|e| ApiError(Error::Json(e)))
}

fn ok<T: Serialize>(v: T) -> ApiResult<T> {
    Ok(Json(v))
}

async fn create(State(m): State<Arc<SessionManager>>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse(&body)?;
    let info = m.create_session(&req)?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn day(State(m): State<Arc<SessionManager>>, Path(id): Path<String>) -> ApiResult<nudge_core::service::DayView> {
    ok(m.day_view(&id)?)
}

async fn order(State(m): State<Arc<SessionManager>>, Path(id): Path<String>, body: Bytes) -> ApiResult<nudge_core::service::StepResult> {
    let req: OrderRequest = parse(&body)?;
    ok(m.post_order(&id, &req)?)
}

async fn summary(State(m): State<Arc<SessionManager>>, Path(id): Path<String>) -> ApiResult<nudge_core::service::SessionSummary> {
    ok(m.summary(&id)?)
}

async fn replay(State(m): State<Arc<SessionManager>>, Path(id): Path<String>) -> ApiResult<Vec<nudge_core::InteractionRecord>> {
    ok(m.replay(&id)?)
}

/// Routes, CORS (any origin unless one is given) and optional static files.
pub fn router(manager: Arc<SessionManager>, cors_origin: Option<&str>, static_dir: Option<PathBuf>) -> Router {
    let cors = match cors_origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(origin) => CorsLayer::new().allow_origin(origin).allow_methods(Any).allow_headers(Any),
        None => CorsLayer::permissive(),
    };
    let api = Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/day", get(day))
        .route("/sessions/{id}/orders", post(order))
        .route("/sessions/{id}/summary", get(summary))
        .route("/sessions/{id}/replay", get(replay))
        .with_state(manager);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(cors)
}
