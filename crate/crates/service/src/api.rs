use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use debtscan::corpus::RubricPath;

use crate::state::{AppState, ServiceError};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(json!({ "code": self.code, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/queue", get(queue))
        .route("/api/tickets/{id}", get(ticket))
        .route("/api/labels", post(post_label))
        .route("/api/retrain", post(retrain).get(retrain_status))
        .route("/api/stats", get(stats))
        .route("/api/model", get(model))
        .fallback(|| async { ServiceError::not_found("no such endpoint") })
        .with_state(state)
}

#[derive(Deserialize)]
struct QueueParams {
    limit: Option<i64>,
}

async fn queue(
    State(state): State<AppState>,
    params: Result<Query<QueueParams>, QueryRejection>,
) -> ApiResult<crate::state::Queue> {
    let Query(params) = params.map_err(|e| ServiceError::bad_request(e.body_text()))?;
    Ok(Json(state.queue(params.limit.unwrap_or(10))?))
}

async fn ticket(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<crate::state::TicketView> {
    Ok(Json(state.ticket(&id)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRequest {
    ticket_id: String,
    label: f64,
    rater: String,
    #[serde(default)]
    rubric_path: RubricPath,
    #[serde(default)]
    notes: Option<String>,
}

async fn post_label(
    State(state): State<AppState>,
    body: Result<Json<LabelRequest>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let Json(req) = body.map_err(|e| ServiceError::bad_request(e.body_text()))?;
    let record = tokio::task::spawn_blocking(move || {
        state.post_label(req.ticket_id, req.label, req.rater, req.rubric_path, req.notes)
    })
    .await
    .map_err(|e| ServiceError::internal(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn retrain(State(state): State<AppState>) -> Result<Response, ServiceError> {
    let (job, accepted) = state.begin_retrain()?;
    tokio::task::spawn_blocking(move || job.run());
    Ok((StatusCode::ACCEPTED, Json(accepted)).into_response())
}

async fn retrain_status(State(state): State<AppState>) -> Json<crate::state::RetrainStatus> {
    Json(state.retrain_status())
}

async fn stats(State(state): State<AppState>) -> ApiResult<crate::state::Stats> {
    Ok(Json(state.stats()?))
}

async fn model(State(state): State<AppState>) -> ApiResult<crate::state::ModelInfo> {
    Ok(Json(state.model_info()?))
}
