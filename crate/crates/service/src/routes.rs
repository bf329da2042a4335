use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use lexiscope_core::analysis::FilterSpec;
use lexiscope_core::sweep::SweepConfig;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::{AppState, Envelope, HeatmapParams, LabelRequest, ProjectionParams};

/// Run a state operation off the async executor.
async fn blocking<T, F>(state: AppState, f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce(AppState) -> Result<Envelope<T>, ApiError> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(state)).await {
        Ok(Ok(body)) => Json(body).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ApiError::internal(format!("request worker failed: {e}")).into_response(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadRequest {
    model_id: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRequest {
    query: String,
}

async fn models(State(s): State<AppState>) -> Response {
    blocking(s, |s| s.models()).await
}

async fn session(State(s): State<AppState>) -> Response {
    blocking(s, |s| s.session()).await
}

async fn load(State(s): State<AppState>, body: Result<Json<LoadRequest>, JsonRejection>) -> Response {
    match body {
        Ok(Json(req)) => blocking(s, move |s| s.load_model(&req.model_id)).await,
        Err(e) => ApiError::from(e).into_response(),
    }
}

async fn unload(State(s): State<AppState>, Path(id): Path<String>) -> Response {
    blocking(s, move |s| s.unload_model(&id)).await
}

async fn set_query(State(s): State<AppState>, body: Result<Json<QueryRequest>, JsonRejection>) -> Response {
    match body {
        Ok(Json(req)) => blocking(s, move |s| s.set_query(&req.query)).await,
        Err(e) => ApiError::from(e).into_response(),
    }
}

async fn heatmap(State(s): State<AppState>, q: Result<Query<HeatmapParams>, QueryRejection>) -> Response {
    match q {
        Ok(Query(p)) => blocking(s, move |s| s.heatmap(&p)).await,
        Err(e) => ApiError::from(e).into_response(),
    }
}

async fn projection(State(s): State<AppState>, q: Result<Query<ProjectionParams>, QueryRejection>) -> Response {
    match q {
        Ok(Query(p)) => blocking(s, move |s| s.projection(&p)).await,
        Err(e) => ApiError::from(e).into_response(),
    }
}

async fn parallel(State(s): State<AppState>) -> Response {
    blocking(s, |s| s.parallel()).await
}

async fn splom(State(s): State<AppState>) -> Response {
    blocking(s, |s| s.splom()).await
}

async fn get_filters(State(s): State<AppState>) -> Response {
    blocking(s, |s| s.filters()).await
}

async fn set_filters(State(s): State<AppState>, body: Result<Json<FilterSpec>, JsonRejection>) -> Response {
    match body {
        Ok(Json(spec)) => blocking(s, move |s| s.set_filter(spec)).await,
        Err(e) => ApiError::from(e).into_response(),
    }
}

async fn list_labels(State(s): State<AppState>) -> Response {
    blocking(s, |s| s.labels()).await
}

async fn add_label(State(s): State<AppState>, body: Result<Json<LabelRequest>, JsonRejection>) -> Response {
    match body {
        Ok(Json(req)) => blocking(s, move |s| s.add_label(&req)).await,
        Err(e) => ApiError::from(e).into_response(),
    }
}

fn label_id(raw: &str) -> Result<u64, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::bad_request(format!("`{raw}` is not a label id")).with_token(raw))
}

async fn update_label(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<LabelRequest>, JsonRejection>,
) -> Response {
    let id = match label_id(&id) {
        Ok(id) => id,
        Err(e) => return e.into_response(),
    };
    match body {
        Ok(Json(req)) => blocking(s, move |s| s.update_label(id, &req)).await,
        Err(e) => ApiError::from(e).into_response(),
    }
}

async fn delete_label(State(s): State<AppState>, Path(id): Path<String>) -> Response {
    match label_id(&id) {
        Ok(id) => blocking(s, move |s| s.delete_label(id)).await,
        Err(e) => e.into_response(),
    }
}

async fn start_sweep(State(s): State<AppState>, body: Result<Json<SweepConfig>, JsonRejection>) -> Response {
    match body {
        Ok(Json(config)) => blocking(s, move |s| s.start_sweep(config)).await,
        Err(e) => ApiError::from(e).into_response(),
    }
}

async fn sweep_status(State(s): State<AppState>) -> Response {
    blocking(s, |s| s.sweep_status()).await
}

async fn cancel_sweep(State(s): State<AppState>) -> Response {
    blocking(s, |s| s.cancel_sweep()).await
}

async fn export(State(s): State<AppState>) -> Response {
    blocking(s, |s| s.export_state()).await
}

async fn import(State(s): State<AppState>, body: Bytes) -> Response {
    let text = match String::from_utf8(body.to_vec()) {
        Ok(t) => t,
        Err(_) => return ApiError::bad_request("state must be UTF-8 JSON").into_response(),
    };
    blocking(s, move |s| s.import_state(&text)).await
}

async fn fallback() -> Response {
    ApiError::not_found("no such endpoint").into_response()
}

/// All endpoints over `state`.
pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/models", get(models))
        .route("/session", get(session))
        .route("/session/load", post(load))
        .route("/session/load/{model_id}", delete(unload))
        .route("/session/query", post(set_query))
        .route("/views/heatmap", get(heatmap))
        .route("/views/projection", get(projection))
        .route("/views/parallel", get(parallel))
        .route("/views/splom", get(splom))
        .route("/filters", get(get_filters).post(set_filters))
        .route("/labels", get(list_labels).post(add_label))
        .route("/labels/{id}", put(update_label).delete(delete_label))
        .route("/sweep", post(start_sweep))
        .route("/sweep/status", get(sweep_status))
        .route("/sweep/cancel", post(cancel_sweep))
        .route("/state/export", get(export))
        .route("/state/import", post(import))
        .fallback(fallback)
        .with_state(state)
}
