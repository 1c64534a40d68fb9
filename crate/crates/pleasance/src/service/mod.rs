//! HTTP session service.
//!
//! Participant routes live under `/api/sessions`; experimenter routes need
//! `Authorization: Bearer <token>` and live under `/api/experimenter`, plus
//! the per-session export.

mod store;

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use pleasance_core::protocol::{ProtocolError, Response, ResponseSchema};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use store::{
    system_clock, Ack, Clock, CreateSession, Created, ExportManifest, NextPayload, PartialEstimate, SessionMeta,
    SessionSummary, Store,
};

use crate::error::Error;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no session {0}")]
    NotFound(String),
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{error}")]
    Protocol { error: ProtocolError, expected: Option<ResponseSchema> },
    #[error("idempotency key {0} was already used for a different response")]
    KeyReused(String),
    #[error("{0}")]
    Conflict(String),
    #[error("missing or wrong experimenter token")]
    Unauthorized,
    #[error("experimenter routes are disabled")]
    Disabled,
    #[error("internal: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        ServiceError::Invalid { field: field.to_string(), message: message.into() }
    }
}

impl From<ProtocolError> for ServiceError {
    fn from(error: ProtocolError) -> Self {
        ServiceError::Protocol { error, expected: None }
    }
}

impl From<Error> for ServiceError {
    fn from(e: Error) -> Self {
        match e {
            Error::Protocol(p) => p.into(),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> HttpResponse {
        let message = self.to_string();
        let (status, body) = match self {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, json!({ "error": "not_found", "message": message })),
            ServiceError::Invalid { field, .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": "invalid", "field": field, "message": message }))
            }
            ServiceError::Protocol { error: ProtocolError::Finished, .. } => {
                (StatusCode::GONE, json!({ "error": "finished", "finished": true, "message": message }))
            }
            ServiceError::Protocol { error: ProtocolError::Incomplete { remaining_trials }, .. } => (
                StatusCode::CONFLICT,
                json!({ "error": "incomplete", "remaining_trials": remaining_trials, "message": message }),
            ),
            ServiceError::Protocol { expected, .. } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "protocol_violation", "expected": expected, "message": message }),
            ),
            ServiceError::KeyReused(_) => (StatusCode::CONFLICT, json!({ "error": "idempotency_key_reused", "message": message })),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, json!({ "error": "conflict", "message": message })),
            ServiceError::Unauthorized => (StatusCode::UNAUTHORIZED, json!({ "error": "unauthorized", "message": message })),
            ServiceError::Disabled => (StatusCode::FORBIDDEN, json!({ "error": "disabled", "message": message })),
            ServiceError::Internal(_) => {
                tracing::error!(%message, "request failed");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "internal", "message": message }))
            }
        };
        (status, Json(body)).into_response()
    }
}

fn bad_body(rejection: JsonRejection) -> ServiceError {
    ServiceError::invalid("body", rejection.body_text())
}

/// Body of `POST /api/sessions/{id}/response`. The key may also come from
/// an `Idempotency-Key` header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseBody {
    #[serde(default)]
    pub idempotency_key: Option<String>,
    pub response: Response,
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub experimenter_token: Option<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/healthz", get(healthz))
        .route("/api/catalog", get(catalog))
        .route("/api/sessions", post(create))
        .route("/api/sessions/{id}/next", get(next))
        .route("/api/sessions/{id}/response", post(respond))
        .route("/api/sessions/{id}/results", get(results))
        .route("/api/sessions/{id}/export", get(export))
        .route("/api/experimenter/sessions", get(list))
        .route("/api/experimenter/sessions/{id}", get(detail))
        .route("/api/experimenter/sessions/{id}/partial", get(partial))
        .with_state(state)
}

fn authorize(state: &AppState, headers: &HeaderMap) -> Result<(), ServiceError> {
    let expected = state.experimenter_token.as_deref().ok_or(ServiceError::Disabled)?;
    let given = headers
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if given == Some(expected) {
        Ok(())
    } else {
        Err(ServiceError::Unauthorized)
    }
}

async fn healthz(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "sessions": state.store.session_count(),
        "presenter": state.store.presenter().kind(),
    }))
}

async fn catalog() -> Json<Vec<pleasance_core::StimulusSpec>> {
    Json(pleasance_core::default_catalog())
}

async fn create(State(state): State<AppState>, body: axum::body::Bytes) -> Result<(StatusCode, Json<Created>), ServiceError> {
    let req = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ServiceError::invalid("body", e.to_string()))?
    };
    Ok((StatusCode::CREATED, Json(state.store.create(req)?)))
}

async fn next(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<NextPayload>, ServiceError> {
    Ok(Json(state.store.next(&id).await?))
}

async fn respond(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Result<Json<ResponseBody>, JsonRejection>,
) -> Result<Json<Ack>, ServiceError> {
    let Json(body) = body.map_err(bad_body)?;
    let header_key = headers.get("idempotency-key").and_then(|v| v.to_str().ok()).map(str::to_string);
    let key = body.idempotency_key.or(header_key);
    Ok(Json(state.store.respond(&id, key, body.response).await?))
}

async fn results(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<crate::bundle::SessionResults>, ServiceError> {
    Ok(Json(state.store.results(&id).await?))
}

async fn export(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<ExportManifest>, ServiceError> {
    authorize(&state, &headers)?;
    Ok(Json(state.store.export(&id).await?))
}

async fn list(State(state): State<AppState>, headers: HeaderMap) -> Result<Json<Vec<SessionSummary>>, ServiceError> {
    authorize(&state, &headers)?;
    Ok(Json(state.store.list().await))
}

/// Full state including the schedule and implied outcomes.
async fn detail(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<serde_json::Value>, ServiceError> {
    authorize(&state, &headers)?;
    let snapshot = state.store.snapshot(&id).await?;
    let meta = state.store.meta(&id).await?;
    Ok(Json(json!({ "state": snapshot, "meta": meta })))
}

async fn partial(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<PartialEstimate>, ServiceError> {
    authorize(&state, &headers)?;
    Ok(Json(state.store.partial_estimate(&id).await?))
}

/// Binds and serves until ctrl-c.
pub async fn serve(addr: std::net::SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
