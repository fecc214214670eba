//! HTTP surface of the annotation store.
//!
//! | method | path               | body / query              | response            |
//! |--------|--------------------|---------------------------|---------------------|
//! | GET    | `/queue`           | `?role=Primary1`          | `{role, post_ids}`  |
//! | POST   | `/score`           | `{post_id, role, score}`  | the updated record  |
//! | GET    | `/record/{id}`     | optional `?role=Primary2` | the record          |
//! | GET    | `/posts/{id}`      |                           | `{id, text}`        |
//! | GET    | `/export`          |                           | `{count, posts}`    |
//!
//! Records returned to an annotator (the `/score` response, or `/record` with
//! a `role`) hide the other annotators' scores until the post is resolved.
//!
//! Errors are `{"error": "..."}` with 400 for invalid input, 404 for an unknown
//! post and 409 for a double submission or a third review out of turn.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value};

use super::{AnnotationRecord, AnnotationStore, ResolvedBy, Role};
use crate::error::Error;

type Shared = Arc<AnnotationStore>;

struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownPost(_) => StatusCode::NOT_FOUND,
            Error::DoubleSubmission { .. } | Error::WrongState { .. } => StatusCode::CONFLICT,
            Error::ScoreOutOfRange(_) | Error::InvalidArgument(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

#[derive(Serialize)]
struct QueueResponse {
    role: Role,
    post_ids: Vec<String>,
}

#[derive(Serialize)]
struct ExportEntry<'a> {
    id: &'a str,
    text: &'a str,
    label: u8,
    resolved_by: ResolvedBy,
}

async fn queue(
    State(store): State<Shared>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<QueueResponse>, ApiError> {
    let role: Role = params
        .get("role")
        .ok_or_else(|| bad_request("missing role parameter"))?
        .parse()?;
    Ok(Json(QueueResponse {
        role,
        post_ids: store.pending_queue(role),
    }))
}

async fn score(
    State(store): State<Shared>,
    body: Result<Json<Value>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<AnnotationRecord>, ApiError> {
    let Json(body) = body.map_err(|e| bad_request(e.body_text()))?;
    let post_id = body
        .get("post_id")
        .and_then(Value::as_str)
        .ok_or_else(|| bad_request("post_id must be a string"))?;
    let role: Role = body
        .get("role")
        .and_then(Value::as_str)
        .ok_or_else(|| bad_request("role must be a string"))?
        .parse()?;
    let score = body
        .get("score")
        .and_then(Value::as_i64)
        .ok_or_else(|| bad_request("score must be an integer in 0..=10"))?;
    // The store call may fsync; keep it off the async workers.
    let post_id = post_id.to_string();
    let record = tokio::task::spawn_blocking(move || store.submit_score(&post_id, role, score))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(record.view_for(role)))
}

async fn record(
    State(store): State<Shared>,
    Path(post_id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<AnnotationRecord>, ApiError> {
    let record = store.record(&post_id)?;
    Ok(Json(match params.get("role") {
        Some(role) => record.view_for(role.parse()?),
        None => record,
    }))
}

async fn post_text(State(store): State<Shared>, Path(post_id): Path<String>) -> Result<Json<Value>, ApiError> {
    let post = store
        .post(&post_id)
        .ok_or_else(|| ApiError::from(Error::UnknownPost(post_id.clone())))?;
    Ok(Json(json!({ "id": post.id, "text": post.text })))
}

async fn export(State(store): State<Shared>) -> Json<Value> {
    let records = store.records();
    let entries: Vec<ExportEntry<'_>> = store
        .posts()
        .iter()
        .zip(&records)
        .filter_map(|(p, r)| {
            r.final_label.map(|label| ExportEntry {
                id: &p.id,
                text: &p.text,
                label: u8::from(label),
                resolved_by: r.resolved_by,
            })
        })
        .collect();
    Json(json!({ "count": entries.len(), "posts": entries }))
}

pub fn router(store: Arc<AnnotationStore>) -> Router {
    Router::new()
        .route("/queue", get(queue))
        .route("/score", post(score))
        .route("/record/{post_id}", get(record))
        .route("/posts/{post_id}", get(post_text))
        .route("/export", get(export))
        .with_state(store)
}

/// Serves the annotation API on an already-bound listener until the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, store: Arc<AnnotationStore>) -> std::io::Result<()> {
    axum::serve(listener, router(store)).await
}
