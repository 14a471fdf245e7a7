//! HTTP sessions that run the learning loop with a live human as the oracle.
//!
//! Each session owns one meta-state. A client fetches the pending query,
//! shows it to a person, and posts the answer back; the server applies the
//! transition and persists the session so it survives restarts.

pub mod api;
pub mod error;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use infomdp_harness::ExperimentConfig;
use tokio::sync::Mutex as SessionLock;

use crate::api::{
    belief_view, grid_view, summary, BeliefView, CreateRequest, CreateResponse, QueryPayload, ResponseAck,
    ResponseRequest, TrajectoryView, TranscriptView, VERSION,
};
pub use crate::error::{ApiError, ErrorBody};
use crate::store::Session;

type Shared = Arc<SessionLock<Session>>;

pub struct Service {
    root: PathBuf,
    default_config: Option<ExperimentConfig>,
    sessions: Mutex<HashMap<String, Shared>>,
}

impl Service {
    /// Sessions are stored under `root`; `default_config` serves creates that omit one.
    pub fn new(root: impl Into<PathBuf>, default_config: Option<ExperimentConfig>) -> Arc<Self> {
        Arc::new(Service { root: root.into(), default_config, sessions: Mutex::new(HashMap::new()) })
    }

    fn lookup(&self, id: &str) -> Result<Shared, ApiError> {
        if !id.chars().all(|c| c.is_ascii_hexdigit() || c == '-') || id.is_empty() {
            return Err(ApiError::not_found(id));
        }
        let mut sessions = self.sessions.lock().expect("session table poisoned");
        if let Some(s) = sessions.get(id) {
            return Ok(s.clone());
        }
        let loaded = Session::load(&self.root, id)
            .map_err(|e| ApiError::internal(e.to_string()))?
            .ok_or_else(|| ApiError::not_found(id))?;
        let shared = Arc::new(SessionLock::new(loaded));
        sessions.insert(id.to_string(), shared.clone());
        Ok(shared)
    }
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/query", get(next_query))
        .route("/sessions/{id}/response", post(post_response))
        .route("/sessions/{id}/belief", get(get_belief))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .with_state(service)
}

pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service)).await
}

fn check_version(v: u32) -> Result<(), ApiError> {
    if v != VERSION {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "unsupported_version", format!("schema version {v} is not supported"))
            .with_field("v"));
    }
    Ok(())
}

/// Runs blocking work on a session while holding its lock.
async fn with_session<T: Send + 'static>(
    shared: Shared,
    work: impl FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let mut guard = shared.lock_owned().await;
    tokio::task::spawn_blocking(move || work(&mut guard))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn create_session(
    State(service): State<Arc<Service>>,
    body: Bytes,
) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let req: CreateRequest = ApiError::parse(&body)?;
    check_version(req.v)?;
    let config = match req.config {
        Some(value) => ExperimentConfig::from_json(&value.to_string()).map_err(|e| ApiError::config(e, "config"))?,
        None => service.default_config.clone().ok_or_else(|| {
            ApiError::new(StatusCode::BAD_REQUEST, "invalid_config", "this server has no default config")
                .with_field("config")
        })?,
    };
    let seed = req.seed.unwrap_or(config.seeds[0]);
    let id = uuid::Uuid::new_v4().simple().to_string();
    let root = service.root.clone();
    let session = tokio::task::spawn_blocking(move || -> Result<Session, ApiError> {
        let session = Session::create(&root, id, config, seed)?;
        session.save().map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(session)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    let resp = CreateResponse { v: VERSION, id: session.id.clone(), summary: summary(&session.episode, false) };
    service.sessions.lock().expect("session table poisoned").insert(session.id.clone(), Arc::new(SessionLock::new(session)));
    Ok((StatusCode::CREATED, Json(resp)))
}

async fn next_query(State(service): State<Arc<Service>>, Path(id): Path<String>) -> Result<Json<QueryPayload>, ApiError> {
    let shared = service.lookup(&id)?;
    with_session(shared, |s| {
        if s.pending.is_some() {
            return Err(ApiError::conflict("a query is already pending; answer it first"));
        }
        let chosen = s.episode.propose()?;
        s.pending = Some(chosen.clone());
        s.save().map_err(|e| ApiError::internal(e.to_string()))?;
        let q = &chosen.query;
        Ok(Json(QueryPayload {
            v: VERSION,
            id: s.id.clone(),
            step: s.episode.state().step(),
            variant: q.kind(),
            score: chosen.score,
            trajectories: q
                .trajectories()
                .into_iter()
                .map(|c| TrajectoryView { cells: c.trajectory.cells(), features: c.features.0.clone() })
                .collect(),
            responses: chosen.predicted.iter().map(|(r, _)| r.clone()).collect(),
            predicted: chosen.predicted.iter().map(|(_, p)| *p).collect(),
            grid: grid_view(&s.config),
            feature_names: s.config.features.names().into_iter().map(String::from).collect(),
            query: q.clone(),
        }))
    })
    .await
}

async fn post_response(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<ResponseAck>, ApiError> {
    let shared = service.lookup(&id)?;
    let req: ResponseRequest = ApiError::parse(&body)?;
    check_version(req.v)?;
    with_session(shared, move |s| {
        let Some(pending) = s.pending.clone() else {
            return Err(ApiError::conflict("no query is pending"));
        };
        match pending.query.outcome_index(&req.response) {
            Ok(Some(_)) => {}
            Ok(None) => {
                return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_response", "answer is outside the query's support")
                    .with_field("response"))
            }
            Err(e) => {
                return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_response", e.to_string())
                    .with_field("response"))
            }
        }
        let mut next = s.episode.clone();
        let line = next.apply(&pending.query, &req.response)?;
        s.append(line).map_err(|e| ApiError::internal(e.to_string()))?;
        s.episode = next;
        s.pending = None;
        s.save().map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(Json(ResponseAck { v: VERSION, summary: summary(&s.episode, false) }))
    })
    .await
}

async fn get_belief(State(service): State<Arc<Service>>, Path(id): Path<String>) -> Result<Json<BeliefView>, ApiError> {
    let shared = service.lookup(&id)?;
    let s = shared.lock().await;
    Ok(Json(belief_view(&s.episode)))
}

async fn get_transcript(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Result<Json<TranscriptView>, ApiError> {
    let shared = service.lookup(&id)?;
    let s = shared.lock().await;
    Ok(Json(TranscriptView { v: VERSION, lines: s.transcript.clone() }))
}
