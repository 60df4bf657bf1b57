use std::convert::Infallible;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cofac_core::classifier::{feature_report, FeatureReportRow};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::error::ServiceError;
use crate::model::{
    AckBody, CreateSession, CreatedSession, EditBody, EditResponse, Event, EventBody, IngestSegment, SegmentAnalysis,
    SessionView,
};
use crate::state::AppState;

pub const API_KEY_HEADER: &str = "x-api-key";

/// JSON body whose rejections use the service error format.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ServiceError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| ApiJson(v))
            .map_err(|e| ServiceError::InvalidBody(e.body_text()))
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/schema", get(schema))
        .route("/models", get(list_models))
        .route("/models/{id}/features", get(features))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_view))
        .route("/sessions/{id}/segments", post(ingest))
        .route("/sessions/{id}/segments/{idx}/edits", post(edit))
        .route("/sessions/{id}/segments/{idx}/ack", post(acknowledge))
        .route("/sessions/{id}/close", post(close))
        .route("/sessions/{id}/timeline", get(timeline))
        .route("/sessions/{id}/summary", get(summary))
        .route("/sessions/{id}/events", get(events))
        .layer(middleware::from_fn_with_state(state.clone(), require_key))
        .with_state(state.clone());
    let base = state.config().base_path.clone();
    if base.is_empty() {
        api
    } else {
        Router::new().nest(&base, api)
    }
}

#[derive(Deserialize)]
struct KeyQuery {
    api_key: Option<String>,
}

async fn require_key(
    State(state): State<AppState>,
    Query(q): Query<KeyQuery>,
    headers: HeaderMap,
    req: Request,
    next: Next,
) -> Response {
    if let Some(expected) = &state.config().api_key {
        // EventSource cannot set headers, so the query parameter is accepted too
        let given = headers
            .get(API_KEY_HEADER)
            .and_then(|v| v.to_str().ok())
            .map(String::from)
            .or(q.api_key);
        if given.as_deref() != Some(expected.as_str()) {
            return ServiceError::Unauthorized.into_response();
        }
    }
    next.run(req).await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn schema(State(state): State<AppState>) -> Json<cofac_core::ConceptSchema> {
    Json(state.schema().clone())
}

#[derive(Serialize)]
struct ModelInfo {
    model_ref: String,
    schema_version: String,
    trained_at: chrono::DateTime<chrono::Utc>,
    n_samples: usize,
}

async fn list_models(State(state): State<AppState>) -> Json<Vec<ModelInfo>> {
    Json(
        state
            .model_refs()
            .into_iter()
            .map(|(model_ref, m)| ModelInfo {
                model_ref,
                schema_version: m.schema_version.clone(),
                trained_at: m.trained_at,
                n_samples: m.manifest.n_samples,
            })
            .collect(),
    )
}

async fn features(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Vec<FeatureReportRow>>, ServiceError> {
    let model = state.model(&id)?;
    Ok(Json(feature_report(&model)))
}

async fn create_session(
    State(state): State<AppState>,
    ApiJson(body): ApiJson<CreateSession>,
) -> Result<(StatusCode, Json<CreatedSession>), ServiceError> {
    let entry = state.create_session(body.stage_goals, body.model_ref)?;
    Ok((StatusCode::CREATED, Json(CreatedSession { session_id: entry.id })))
}

async fn session_view(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ServiceError> {
    let entry = state.session(&id)?;
    let s = entry.session.lock().await;
    Ok(Json(s.view()))
}

/// Runs a blocking session operation under the session lock.
async fn with_session<T, F>(state: &AppState, id: &str, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&mut crate::session::Session, &AppState) -> Result<T, ServiceError> + Send + 'static,
{
    let entry = state.session(id)?;
    let mut guard = entry.session.lock_owned().await;
    let state = state.clone();
    tokio::task::spawn_blocking(move || f(&mut guard, &state))
        .await
        .map_err(|e| ServiceError::Internal(format!("worker panicked: {e}")))?
}

async fn ingest(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<IngestSegment>,
) -> Result<Json<SegmentAnalysis>, ServiceError> {
    with_session(&state, &id, move |s, st| {
        let model = st.model(&s.meta().model_ref)?;
        s.ingest(&model, &st.pipeline(), body)
    })
    .await
    .map(Json)
}

async fn edit(
    State(state): State<AppState>,
    Path((id, idx)): Path<(String, usize)>,
    ApiJson(body): ApiJson<EditBody>,
) -> Result<Json<EditResponse>, ServiceError> {
    with_session(&state, &id, move |s, st| {
        let model = st.model(&s.meta().model_ref)?;
        s.edit(&model, &st.pipeline(), idx, body)
    })
    .await
    .map(Json)
}

async fn acknowledge(
    State(state): State<AppState>,
    Path((id, idx)): Path<(String, usize)>,
    ApiJson(body): ApiJson<AckBody>,
) -> Result<Json<SegmentAnalysis>, ServiceError> {
    with_session(&state, &id, move |s, st| s.acknowledge(&st.pipeline(), idx, body.state))
        .await
        .map(Json)
}

async fn close(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ServiceError> {
    with_session(&state, &id, |s, st| s.close(&st.pipeline())).await.map(Json)
}

async fn timeline(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Vec<SegmentAnalysis>>, ServiceError> {
    let entry = state.session(&id)?;
    let s = entry.session.lock().await;
    Ok(Json(s.timeline().to_vec()))
}

async fn summary(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<cofac_core::MeetingSummary>, ServiceError> {
    let entry = state.session(&id)?;
    let s = entry.session.lock().await;
    Ok(Json(s.summary().clone()))
}

#[derive(Deserialize)]
struct EventsQuery {
    last_event_id: Option<u64>,
}

fn last_event_id(headers: &HeaderMap, q: &EventsQuery) -> Result<u64, ServiceError> {
    match headers.get("last-event-id") {
        Some(v) => v
            .to_str()
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| ServiceError::InvalidBody("Last-Event-ID must be a sequence number".into())),
        None => Ok(q.last_event_id.unwrap_or(0)),
    }
}

fn to_sse(e: &Event) -> SseEvent {
    SseEvent::default()
        .id(e.seq.to_string())
        .event(e.body.kind())
        .json_data(e)
        .expect("events serialize")
}

async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, ServiceError> {
    let entry = state.session(&id)?;
    let after = last_event_id(&headers, &q)?;
    let sub = entry.hub.subscribe(after);
    let last_backlog = sub.backlog.last().map_or(after, |e| e.seq);
    let backlog = stream::iter(sub.backlog);
    let live = stream::unfold((sub.live, last_backlog), |(rx, last)| async move {
        let mut rx = rx?;
        loop {
            match rx.recv().await {
                Ok(e) if e.seq <= last => continue,
                Ok(e) => {
                    let seq = e.seq;
                    let next = (e.body != EventBody::SessionClosed).then_some(rx);
                    return Some((e, (next, seq)));
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    // the client resumes from its Last-Event-ID on reconnect
                    tracing::warn!(skipped = n, "event subscriber lagged; closing stream");
                    return None;
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    let stream = backlog
        .chain(live)
        .map(|e| Ok(to_sse(&e)))
        .take_until(state.shutting_down());
    Ok(Sse::new(stream).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}
