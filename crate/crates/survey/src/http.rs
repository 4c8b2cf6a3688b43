//! JSON-over-HTTP surface consumed by the survey front end.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::model::{BlindItem, Demographics, RatingSubmission, SessionStatus, ITEMS_PER_SESSION};
use crate::service::{SurveyError, SurveyService};

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<Mutex<SurveyService>>,
    /// Bearer token required by the export endpoint.
    pub operator_token: Arc<str>,
}

impl AppState {
    pub fn new(service: SurveyService, operator_token: impl Into<Arc<str>>) -> Self {
        AppState { service: Arc::new(Mutex::new(service)), operator_token: operator_token.into() }
    }
}

impl IntoResponse for SurveyError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            SurveyError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            SurveyError::UnknownItem { .. } => (StatusCode::NOT_FOUND, "unknown_item"),
            SurveyError::DuplicateRating(_) => (StatusCode::CONFLICT, "duplicate_rating"),
            SurveyError::DuplicateParticipant(_) => (StatusCode::CONFLICT, "duplicate_participant"),
            SurveyError::DuplicateDemographics => (StatusCode::CONFLICT, "duplicate_demographics"),
            SurveyError::Closed(_) => (StatusCode::CONFLICT, "session_closed"),
            SurveyError::OutOfRange(_) => (StatusCode::UNPROCESSABLE_ENTITY, "out_of_range"),
            SurveyError::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
            SurveyError::Pool(_) | SurveyError::Journal { .. } => {
                tracing::error!(error = %self, "survey storage failure");
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        (status, Json(json!({ "error": code, "message": self.to_string() }))).into_response()
    }
}

/// Malformed request bodies get the same JSON error shape as domain errors.
fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, Response> {
    payload.map(|Json(t)| t).map_err(|rejection| {
        (rejection.status(), Json(json!({ "error": "bad_request", "message": rejection.body_text() }))).into_response()
    })
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    participant_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub total_items: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NextItem {
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<BlindItem>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RatingAccepted {
    pub status: SessionStatus,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/ratings", post(submit_rating))
        .route("/sessions/{id}/demographics", post(submit_demographics))
        .route("/export.csv", get(export_csv))
        .with_state(state)
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), Response> {
    let request = body(payload)?;
    let session = state
        .service
        .lock()
        .expect("service lock")
        .create_session(&request.participant_id)
        .map_err(IntoResponse::into_response)?;
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id: session.session_id, total_items: ITEMS_PER_SESSION + 1 })))
}

async fn next_item(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<NextItem>, SurveyError> {
    let next = state.service.lock().expect("service lock").next_item(&id)?;
    Ok(Json(match next {
        Some((position, item)) => NextItem { done: false, position: Some(position), item: Some(item) },
        None => NextItem { done: true, position: None, item: None },
    }))
}

async fn submit_rating(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<RatingSubmission>, JsonRejection>,
) -> Result<Json<RatingAccepted>, Response> {
    let rating = body(payload)?;
    let status =
        state.service.lock().expect("service lock").submit_rating(&id, rating).map_err(IntoResponse::into_response)?;
    Ok(Json(RatingAccepted { status }))
}

async fn submit_demographics(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<Demographics>, JsonRejection>,
) -> Result<StatusCode, Response> {
    let demographics = body(payload)?;
    state
        .service
        .lock()
        .expect("service lock")
        .submit_demographics(&id, demographics)
        .map_err(IntoResponse::into_response)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn export_csv(State(state): State<AppState>, headers: HeaderMap) -> Response {
    let authorized = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| !state.operator_token.is_empty() && t == &*state.operator_token);
    if !authorized {
        return (StatusCode::UNAUTHORIZED, Json(json!({ "error": "unauthorized", "message": "operator token required" })))
            .into_response();
    }
    let body = state.service.lock().expect("service lock").export_csv();
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response()
}

/// Serves until ctrl-c.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "survey service listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
