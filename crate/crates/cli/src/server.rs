//! HTTP service exposing interactive design sessions.
//!
//! Each session sits behind its own mutex, so requests to one session are
//! applied in arrival order while different sessions proceed independently.
//! Session work is CPU-bound and runs on the blocking pool.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex, PoisonError, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use tripassist::session::{EventRecord, Session, SessionConfig, TripObservation};
use tripassist::{City, CityConfig, Error, TripChange};

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Conflict {
        message: String,
        legal_changes: Option<Vec<TripChange>>,
    },
    BadRequest(String),
    Internal(String),
}

impl ApiError {
    fn from_core(err: Error, session: Option<&Session>) -> Self {
        match err {
            Error::IllegalChange(_) | Error::UnknownPoi(_) => ApiError::Conflict {
                message: err.to_string(),
                legal_changes: session.and_then(|s| s.legal_changes().ok()),
            },
            Error::InvalidArgument(_) | Error::Config(_) | Error::Format(_) | Error::InvalidState(_) => {
                ApiError::BadRequest(err.to_string())
            }
            Error::Io(_) | Error::DegeneratePosterior(_) => ApiError::Internal(err.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::BadRequest(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::BadRequest(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({ "error": "not_found", "message": m })),
            ApiError::Conflict { message, legal_changes } => (
                StatusCode::CONFLICT,
                json!({ "error": "illegal_change", "message": message, "legal_changes": legal_changes }),
            ),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": "bad_request", "message": m })),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "internal", "message": m })),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Shared service state.
#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    event_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(event_dir: Option<PathBuf>) -> Self {
        Self {
            sessions: RwLock::default(),
            event_dir,
        }
    }

    /// Rebuilds every session whose event log is found in the event directory.
    pub fn restore(&self) -> tripassist::Result<usize> {
        let Some(dir) = &self.event_dir else {
            return Ok(0);
        };
        let mut restored = 0;
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let mut session = Session::replay(&Session::load_events(&path)?)?;
            session.resume_log(&path)?;
            self.insert(session);
            restored += 1;
        }
        Ok(restored)
    }

    fn insert(&self, session: Session) {
        let id = session.id().to_string();
        self.sessions
            .write()
            .unwrap_or_else(PoisonError::into_inner)
            .insert(id, Arc::new(Mutex::new(session)));
    }

    fn get(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
    }

    fn contains(&self, id: &str) -> bool {
        self.sessions.read().unwrap_or_else(PoisonError::into_inner).contains_key(id)
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.event_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }
}

/// Runs `f` on the locked session on the blocking pool.
async fn with_session<T, F>(state: &AppState, id: &str, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> ApiResult<T> + Send + 'static,
{
    let session = state.get(id)?;
    tokio::task::spawn_blocking(move || {
        let mut guard = session.lock().unwrap_or_else(PoisonError::into_inner);
        f(&mut guard)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/city", get(get_city))
        .route("/sessions/{id}/recommendation", get(get_recommendation))
        .route("/sessions/{id}/choose", post(choose))
        .route("/sessions/{id}/whatif", get(get_whatif))
        .route("/sessions/{id}/trace", get(get_trace))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateCity {
    #[serde(default = "default_n_pois")]
    pub n_pois: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_pois() -> usize {
    100
}

/// Body of `POST /sessions`. At most one city source may be given; without
/// one, a default-sized city is generated from the config seed.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub session_id: Option<String>,
    pub city: Option<City>,
    pub city_file: Option<PathBuf>,
    pub generate: Option<GenerateCity>,
    #[serde(default)]
    pub config: SessionConfig,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn resolve_city(body: &mut CreateSession) -> ApiResult<City> {
    let sources = [body.city.is_some(), body.city_file.is_some(), body.generate.is_some()];
    if sources.iter().filter(|&&s| s).count() > 1 {
        return Err(ApiError::BadRequest("give at most one of city, city_file, generate".into()));
    }
    let core = |e| ApiError::from_core(e, None);
    if let Some(city) = body.city.take() {
        city.validate().map_err(core)?;
        Ok(city)
    } else if let Some(path) = &body.city_file {
        City::load(path).map_err(|e| ApiError::BadRequest(format!("cannot load {}: {e}", path.display())))
    } else {
        let (n, seed) = body.generate.as_ref().map_or((100, body.config.seed), |g| (g.n_pois, g.seed));
        City::generate(n, seed, &CityConfig::default()).map_err(core)
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<tripassist::session::SessionView>)> {
    let Json(mut body) = body?;
    let id = match body.session_id.take() {
        Some(id) if !valid_id(&id) => {
            return Err(ApiError::BadRequest("session_id must be 1-64 characters of [A-Za-z0-9_-]".into()))
        }
        Some(id) => id,
        None => uuid::Uuid::new_v4().simple().to_string(),
    };
    if state.contains(&id) {
        return Err(ApiError::Conflict {
            message: format!("session {id} already exists"),
            legal_changes: None,
        });
    }
    let log_path = state.log_path(&id);
    let view = tokio::task::spawn_blocking(move || -> ApiResult<_> {
        let city = resolve_city(&mut body)?;
        let mut session = Session::create(id, city, body.config).map_err(|e| ApiError::from_core(e, None))?;
        if let Some(path) = log_path {
            session.persist_to(path).map_err(|e| ApiError::Internal(e.to_string()))?;
        }
        let view = session.view().map_err(|e| ApiError::from_core(e, None))?;
        Ok((session, view))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    let (session, view) = view?;
    state.insert(session);
    Ok((StatusCode::CREATED, Json(view)))
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<Vec<String>> {
    let mut ids: Vec<String> = state
        .sessions
        .read()
        .unwrap_or_else(PoisonError::into_inner)
        .keys()
        .cloned()
        .collect();
    ids.sort();
    Json(ids)
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    with_session(&state, &id, |s| {
        s.view().map(|v| Json(v).into_response()).map_err(|e| ApiError::from_core(e, Some(s)))
    })
    .await
}

async fn get_city(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    with_session(&state, &id, |s| Ok(Json(s.city().clone()).into_response())).await
}

async fn get_recommendation(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    with_session(&state, &id, |s| {
        s.recommendation()
            .map(|r| Json(r).into_response())
            .map_err(|e| ApiError::from_core(e, Some(s)))
    })
    .await
}

/// A change as `"add:3"` text or as `{"kind": "add", "poi": 3}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ChangeInput {
    Text(String),
    Change(TripChange),
}

impl ChangeInput {
    fn parse(self) -> ApiResult<TripChange> {
        match self {
            ChangeInput::Change(c) => Ok(c),
            ChangeInput::Text(t) => t.parse().map_err(|e: Error| ApiError::BadRequest(e.to_string())),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChooseBody {
    pub change: ChangeInput,
    pub request_id: Option<String>,
}

async fn choose(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<ChooseBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let change = body.change.parse()?;
    with_session(&state, &id, move |s| {
        s.choose(change, body.request_id)
            .map(|v| Json(v).into_response())
            .map_err(|e| ApiError::from_core(e, Some(s)))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct WhatIfQuery {
    pub change: String,
}

async fn get_whatif(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<WhatIfQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(query) = query?;
    let change = ChangeInput::Text(query.change).parse()?;
    with_session(&state, &id, move |s| {
        s.whatif(change)
            .map(|w| Json(w).into_response())
            .map_err(|e| ApiError::from_core(e, Some(s)))
    })
    .await
}

#[derive(Debug, Serialize)]
pub struct Trace {
    pub session_id: String,
    pub history: Vec<TripObservation>,
    pub events: Vec<EventRecord>,
}

async fn get_trace(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Trace>> {
    with_session(&state, &id, |s| {
        Ok(Json(Trace {
            session_id: s.id().to_string(),
            history: s.history().to_vec(),
            events: s.events().to_vec(),
        }))
    })
    .await
}

/// Checks that `dir` exists and is a directory, creating it if missing.
pub fn prepare_event_dir(dir: &FsPath) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)
}
