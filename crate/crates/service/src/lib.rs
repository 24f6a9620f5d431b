//! HTTP/JSON facade over a recording session.
//!
//! Each session holds the metamodels, the history being recorded and a set
//! of input models for migration runs. Mutating requests carry the
//! revision they were based on and are refused with 409 when it is stale;
//! a refused or failed request never changes the session.

mod error;
mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

pub use error::ApiError;
pub use session::{CreateSession, Session};

use coevo_core::history::Bindings;

/// Shared service state: sessions by id.
#[derive(Default, Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<Session>>>>>,
    next_id: Arc<AtomicU64>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(summary))
        .route("/sessions/{id}/metamodels", get(metamodels))
        .route("/sessions/{id}/operations", get(operations))
        .route("/sessions/{id}/operations/{name}", post(apply))
        .route("/sessions/{id}/release", post(release))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/migrate", post(migrate))
        .route("/sessions/{id}/save", post(save))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new())).await
}

type ApiResult = Result<Json<Value>, ApiError>;

fn lock(s: &Mutex<Session>) -> std::sync::MutexGuard<'_, Session> {
    s.lock().unwrap_or_else(|p| p.into_inner())
}

async fn create_session(
    State(state): State<AppState>,
    Json(body): Json<CreateSession>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let id = format!("s{}", state.next_id.fetch_add(1, Ordering::SeqCst) + 1);
    let session = Session::create(&id, body)?;
    let view = session.summary();
    state
        .sessions
        .write()
        .expect("session map lock")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn summary(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id)?;
    let view = lock(&s).summary();
    Ok(Json(view))
}

async fn metamodels(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id)?;
    let s = lock(&s);
    Ok(Json(
        json!({"revision": s.revision(), "metamodels": s.metamodel_docs()}),
    ))
}

#[derive(Deserialize)]
struct SelectionQuery {
    #[serde(default)]
    selection: String,
}

async fn operations(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SelectionQuery>,
) -> ApiResult {
    let selection: Vec<String> = q
        .selection
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    let s = state.session(&id)?;
    let s = lock(&s);
    Ok(Json(
        json!({"revision": s.revision(), "operations": s.operations(&selection)}),
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyBody {
    revision: u64,
    #[serde(default)]
    bindings: Bindings,
}

async fn apply(
    State(state): State<AppState>,
    Path((id, name)): Path<(String, String)>,
    Json(body): Json<ApplyBody>,
) -> ApiResult {
    let s = state.session(&id)?;
    let mut s = lock(&s);
    s.check_revision(body.revision)?;
    let record = s.apply(&name, body.bindings)?;
    Ok(Json(json!({
        "revision": s.revision(),
        "label": record.label(),
        "record": record,
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReleaseBody {
    revision: u64,
    #[serde(default)]
    force: bool,
}

async fn release(State(state): State<AppState>, Path(id): Path<String>, Json(body): Json<ReleaseBody>) -> ApiResult {
    let s = state.session(&id)?;
    let mut s = lock(&s);
    s.check_revision(body.revision)?;
    s.release(body.force)?;
    Ok(Json(s.history_view()))
}

async fn history(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id)?;
    let view = lock(&s).history_view();
    Ok(Json(view))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MigrateBody {
    /// Primary resource uri of one input model; all inputs when absent.
    model: Option<String>,
    from: Option<usize>,
    to: Option<usize>,
}

async fn migrate(State(state): State<AppState>, Path(id): Path<String>, body: Option<Json<MigrateBody>>) -> ApiResult {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let s = state.session(&id)?;
    let s = lock(&s);
    s.migrate(body.model.as_deref(), body.from, body.to).map(Json)
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SaveBody {
    /// Where to write the history file; the text is returned either way.
    path: Option<String>,
}

async fn save(State(state): State<AppState>, Path(id): Path<String>, body: Option<Json<SaveBody>>) -> ApiResult {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let s = state.session(&id)?;
    let s = lock(&s);
    let text = s.history_text();
    if let Some(path) = &body.path {
        std::fs::write(path, &text).map_err(|e| ApiError::io(format!("{path}: {e}")))?;
    }
    let history: Value = serde_json::from_str(&text).expect("history text is JSON");
    Ok(Json(json!({
        "revision": s.revision(),
        "path": body.path,
        "bytes": text.len(),
        "history": history,
    })))
}
