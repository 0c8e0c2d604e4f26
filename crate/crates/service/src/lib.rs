//! HTTP API for playing against the agent.
//!
//! Routes:
//!
//! - `POST /sessions` with `{"k": 4, "seed": 7}` (both optional, body may be empty) starts a game
//!   and returns the human's view plus the agent's opening line.
//! - `POST /sessions/{id}/utterance` with `{"text": "..."}` returns the agent's reply.
//! - `POST /sessions/{id}/selection` with `{"dot": 3}` closes the game and
//!   returns the result.
//! - `GET /sessions/{id}/transcript` returns the turns so far; hidden fields
//!   (seed, shared dots, agent view, id map, agent log) appear only after close.
//! - `GET /healthz`.
//!
//! When a token is configured every route except `/healthz` needs
//! `Authorization: Bearer <token>`. Errors are `{"error": "..."}` with a
//! matching status code.

mod session;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use spc_core::context::{generate_context, ContextConfig};
use spc_core::engine::AgentConfig;
use spc_core::reader::{GrammarReader, Reader};

pub use session::{
    AgentReply, Awaiting, Created, DotView, GameOutcome, Replied, Role, SceneView, Session, Transcript, Turn,
};

pub const TOKEN_ENV: &str = "SPC_TOKEN";

#[derive(Debug, Error, PartialEq)]
pub enum ApiError {
    #[error("unknown session")]
    NotFound,
    #[error("session is closed")]
    Closed,
    #[error("another request for this session is in progress")]
    OutOfTurn,
    #[error("the agent has selected; post a selection")]
    AwaitingSelection,
    #[error("{0}")]
    Validation(String),
    #[error("dot {0} is not in your view")]
    UnknownDot(u32),
    #[error("session capacity reached")]
    Capacity,
    #[error("missing or wrong bearer token")]
    Unauthorized,
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound => StatusCode::NOT_FOUND,
            ApiError::Closed | ApiError::OutOfTurn | ApiError::AwaitingSelection => StatusCode::CONFLICT,
            ApiError::Validation(_) | ApiError::UnknownDot(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Capacity => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::Validation(e.body_text())
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub capacity: usize,
    pub idle_timeout: Duration,
    pub token: Option<String>,
    /// Closed sessions are written here as `<id>.json`.
    pub transcript_dir: Option<PathBuf>,
    pub agent: AgentConfig,
    pub context: ContextConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            capacity: 256,
            idle_timeout: Duration::from_secs(30 * 60),
            token: None,
            transcript_dir: None,
            agent: AgentConfig::default(),
            context: ContextConfig::default(),
        }
    }
}

impl ServiceConfig {
    /// Picks up the shared token from the environment when set and non-empty.
    pub fn with_env_token(mut self) -> Self {
        if let Ok(t) = std::env::var(TOKEN_ENV) {
            if !t.is_empty() {
                self.token = Some(t);
            }
        }
        self
    }
}

struct Entry {
    session: Arc<tokio::sync::Mutex<Session>>,
    touched: Mutex<Instant>,
}

pub struct AppState {
    cfg: ServiceConfig,
    reader: Arc<dyn Reader>,
    sessions: Mutex<HashMap<String, Arc<Entry>>>,
}

impl AppState {
    pub fn new(cfg: ServiceConfig, reader: Arc<dyn Reader>) -> Arc<Self> {
        Arc::new(AppState { cfg, reader, sessions: Mutex::new(HashMap::new()) })
    }

    pub fn with_grammar(cfg: ServiceConfig) -> Arc<Self> {
        Self::new(cfg, Arc::new(GrammarReader))
    }

    pub fn live_sessions(&self) -> usize {
        self.sessions.lock().expect("session map").len()
    }

    fn sweep(&self, map: &mut HashMap<String, Arc<Entry>>) {
        let limit = self.cfg.idle_timeout;
        map.retain(|_, e| e.touched.lock().expect("touch").elapsed() < limit);
    }

    fn lookup(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        let mut map = self.sessions.lock().expect("session map");
        self.sweep(&mut map);
        let e = map.get(id).cloned().ok_or(ApiError::NotFound)?;
        *e.touched.lock().expect("touch") = Instant::now();
        Ok(e)
    }

    fn stored_path(&self, id: &str) -> Option<PathBuf> {
        let safe = !id.is_empty() && id.chars().all(|c| c.is_ascii_hexdigit());
        self.cfg.transcript_dir.as_ref().filter(|_| safe).map(|d| d.join(format!("{id}.json")))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub k: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub struct UtteranceRequest {
    pub text: String,
}

#[derive(Debug, Deserialize)]
pub struct SelectionRequest {
    pub dot: u32,
}

async fn create(
    State(st): State<Arc<AppState>>,
    body: axum::body::Bytes,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    // An empty body means all defaults.
    let req: CreateRequest = if body.iter().all(u8::is_ascii_whitespace) {
        CreateRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::Validation(e.to_string()))?
    };
    let k = req.k.unwrap_or(4);
    let ctx = generate_context(req.seed.unwrap_or_else(rand::random), k, &st.cfg.context)
        .map_err(|e| ApiError::Validation(e.to_string()))?;
    {
        let mut map = st.sessions.lock().expect("session map");
        st.sweep(&mut map);
        if map.len() >= st.cfg.capacity {
            return Err(ApiError::Capacity);
        }
    }
    let id = format!("{:032x}", rand::random::<u128>());
    let (session, created) = Session::start(id.clone(), ctx, st.cfg.agent, st.reader.clone())?;
    let entry = Entry { session: Arc::new(tokio::sync::Mutex::new(session)), touched: Mutex::new(Instant::now()) };
    let mut map = st.sessions.lock().expect("session map");
    if map.len() >= st.cfg.capacity {
        return Err(ApiError::Capacity);
    }
    map.insert(id, Arc::new(entry));
    Ok((StatusCode::CREATED, Json(created)))
}

/// Runs `f` on the session off the async runtime. A second request while one
/// is in flight is refused rather than queued.
async fn with_session<T: Send + 'static>(
    st: &AppState,
    id: &str,
    f: impl FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let entry = st.lookup(id)?;
    let mut guard = entry.session.clone().try_lock_owned().map_err(|_| ApiError::OutOfTurn)?;
    tokio::task::spawn_blocking(move || f(&mut guard)).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn utterance(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<UtteranceRequest>, JsonRejection>,
) -> Result<Json<Replied>, ApiError> {
    let text = body?.0.text;
    Ok(Json(with_session(&st, &id, move |s| s.utterance(&text)).await?))
}

async fn selection(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<SelectionRequest>, JsonRejection>,
) -> Result<Json<GameOutcome>, ApiError> {
    let dot = body?.0.dot;
    let path = st.stored_path(&id);
    let outcome = with_session(&st, &id, move |s| {
        let outcome = s.select(dot)?;
        if let Some(p) = path {
            let json = serde_json::to_vec_pretty(&s.transcript()).map_err(|e| ApiError::Internal(e.to_string()))?;
            std::fs::write(&p, json).map_err(|e| ApiError::Internal(format!("storing {}: {e}", p.display())))?;
        }
        Ok(outcome)
    })
    .await?;
    Ok(Json(outcome))
}

async fn transcript(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Transcript>, ApiError> {
    match st.lookup(&id) {
        Ok(entry) => {
            let guard = entry.session.try_lock().map_err(|_| ApiError::OutOfTurn)?;
            Ok(Json(guard.transcript()))
        }
        // Closed sessions outlive their in-memory entry in the store.
        Err(ApiError::NotFound) => {
            let p = st.stored_path(&id).ok_or(ApiError::NotFound)?;
            let bytes = tokio::fs::read(&p).await.map_err(|_| ApiError::NotFound)?;
            serde_json::from_slice(&bytes).map(Json).map_err(|e| ApiError::Internal(e.to_string()))
        }
        Err(e) => Err(e),
    }
}

async fn healthz() -> &'static str {
    "ok"
}

async fn auth(State(st): State<Arc<AppState>>, req: Request, next: Next) -> Result<Response, ApiError> {
    if let Some(token) = &st.cfg.token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return Err(ApiError::Unauthorized);
        }
    }
    Ok(next.run(req).await)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/utterance", post(utterance))
        .route("/sessions/{id}/selection", post(selection))
        .route("/sessions/{id}/transcript", get(transcript))
        .route_layer(middleware::from_fn_with_state(state.clone(), auth))
        .route("/healthz", get(healthz))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
