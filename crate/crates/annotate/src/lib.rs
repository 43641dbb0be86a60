//! Annotation HTTP API.
//!
//! | method | path                                  | result                               |
//! |--------|---------------------------------------|--------------------------------------|
//! | GET    | `/api/questions/next?annotator=ID`    | next unfinished question in the plan |
//! | GET    | `/api/questions/{id}`                 | one question thread                  |
//! | POST   | `/api/annotations[?overwrite=true]`   | validate and persist an annotation   |
//! | GET    | `/api/export[?gold=true]`             | annotations as JSON-lines            |
//! | GET    | `/api/progress[?annotator=ID]`        | counts by status                     |

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use snipmine::annotation::{
    export_gold, to_jsonl, Annotation, AnnotationStore, FieldError, InsertOutcome, SamplingPlan, StoreError,
};
use snipmine::ingest::QuestionThread;

pub struct AppState {
    threads: BTreeMap<u64, QuestionThread>,
    plan: SamplingPlan,
    /// Reads share the lock; every write goes through the single writer.
    store: RwLock<AnnotationStore>,
}

impl AppState {
    pub fn new(threads: Vec<QuestionThread>, plan: SamplingPlan, store: AnnotationStore) -> Self {
        AppState {
            threads: threads.into_iter().map(|t| (t.question_id, t)).collect(),
            plan,
            store: RwLock::new(store),
        }
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn field_errors(errors: Vec<FieldError>) -> Response {
    (StatusCode::UNPROCESSABLE_ENTITY, Json(json!({ "errors": errors }))).into_response()
}

#[derive(Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

async fn next_question(State(st): State<Arc<AppState>>, Query(q): Query<AnnotatorQuery>) -> Response {
    let Some(annotator) = q.annotator.filter(|a| !a.trim().is_empty()) else {
        return error(StatusCode::BAD_REQUEST, "query parameter `annotator` is required");
    };
    let finished = st.store.read().expect("store lock").finished_by(&annotator);
    match st.plan.order().find(|id| !finished.contains(id)) {
        Some(id) => match st.threads.get(&id) {
            Some(t) => Json(t).into_response(),
            None => error(StatusCode::INTERNAL_SERVER_ERROR, format!("planned question {id} has no thread")),
        },
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn question(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    match st.threads.get(&id) {
        Some(t) => Json(t).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown question {id}")),
    }
}

#[derive(Deserialize)]
struct PostQuery {
    #[serde(default)]
    overwrite: bool,
}

async fn post_annotation(State(st): State<Arc<AppState>>, Query(q): Query<PostQuery>, body: Bytes) -> Response {
    let raw: serde_json::Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed JSON: {e}")),
    };
    let has_timestamp = raw.get("timestamp").is_some_and(|t| !t.is_null());
    let mut ann: Annotation = match serde_json::from_value(raw) {
        Ok(a) => a,
        Err(e) => {
            return field_errors(vec![FieldError {
                field: "body".into(),
                message: e.to_string(),
            }])
        }
    };
    let Some(thread) = st.threads.get(&ann.question_id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown question {}", ann.question_id));
    };
    if let Err(errors) = ann.validate(thread) {
        return field_errors(errors);
    }
    if !has_timestamp {
        ann.timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    }
    let outcome = st.store.write().expect("store lock").insert(ann.clone(), q.overwrite);
    match outcome {
        Ok(InsertOutcome::Created) => (StatusCode::CREATED, Json(ann)).into_response(),
        Ok(InsertOutcome::Replaced) => (StatusCode::OK, Json(ann)).into_response(),
        Err(e @ StoreError::Duplicate { .. }) => error(StatusCode::CONFLICT, format!("{e}; resend with ?overwrite=true")),
        Err(StoreError::Storage(e)) => {
            log::error!("cannot persist annotation: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, "annotation could not be persisted")
        }
    }
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    gold: bool,
}

async fn export(State(st): State<Arc<AppState>>, Query(q): Query<ExportQuery>) -> Response {
    let all = st.store.read().expect("store lock").all();
    let records = if q.gold { export_gold(&all) } else { all };
    ([(header::CONTENT_TYPE, "application/x-ndjson")], to_jsonl(&records)).into_response()
}

#[derive(Serialize)]
struct Progress {
    plan_size: usize,
    counts: BTreeMap<&'static str, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    finished_by_annotator: Option<usize>,
}

async fn progress(State(st): State<Arc<AppState>>, Query(q): Query<AnnotatorQuery>) -> Response {
    let store = st.store.read().expect("store lock");
    Json(Progress {
        plan_size: st.plan.fixed.len() + st.plan.sampled.len(),
        counts: store.counts_by_status().into_iter().map(|(s, n)| (s.as_str(), n)).collect(),
        finished_by_annotator: q.annotator.map(|a| store.finished_by(&a).len()),
    })
    .into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/questions/next", get(next_question))
        .route("/api/questions/{id}", get(question))
        .route("/api/annotations", post(post_annotation))
        .route("/api/export", get(export))
        .route("/api/progress", get(progress))
        .with_state(state)
}

/// Serves until the listener fails or the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
