//! HTTP session layer: upload a volume, paint seed strokes, run GrowCut,
//! refine the result with morphology and read back volumetry.
//!
//! Sessions live in memory. Within a session, mutations take an exclusive
//! lock (one writer at a time) while reads share it. With a data directory,
//! each session is also stored as its uploaded NRRD plus a journal of the
//! mutations applied, and is rebuilt by replay on startup.

pub mod render;
pub mod session;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock as StdRwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use growcut_core::nrrd::encode_nrrd;
use growcut_core::{Axis, GrowCutConfig, GrowCutError, MorphologyError, NrrdError};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;
use tokio::sync::RwLock;

use session::{Mutation, Session, SessionError};
use store::{Store, StoreError};

/// Upload cap. Large enough for a 512³ float volume.
pub const MAX_BODY_BYTES: usize = 1 << 30;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown session {0}")]
    NotFound(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("invalid request body: {0}")]
    Body(#[from] serde_json::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("worker task failed: {0}")]
    Join(#[from] tokio::task::JoinError),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        use SessionError as S;
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Body(_) => StatusCode::BAD_REQUEST,
            ApiError::Session(e) => match e {
                S::Nrrd(NrrdError::Io(_)) => StatusCode::INTERNAL_SERVER_ERROR,
                S::Nrrd(_) | S::InvalidStroke { .. } | S::BadRequest(_) => StatusCode::BAD_REQUEST,
                S::Segment(GrowCutError::InvalidConfig(_)) => StatusCode::BAD_REQUEST,
                S::Segment(_) => StatusCode::CONFLICT,
                S::Morph(
                    MorphologyError::UnknownOp(_) | MorphologyError::InvalidConnectivity(_),
                ) => StatusCode::BAD_REQUEST,
                S::Morph(_) | S::NoResult => StatusCode::CONFLICT,
            },
            ApiError::Store(_) | ApiError::Join(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Shared = Arc<RwLock<Session>>;

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<StdRwLock<HashMap<String, Shared>>>,
    store: Option<Store>,
}

impl AppState {
    pub fn in_memory() -> Self {
        AppState::default()
    }

    /// Opens (or creates) `dir` and restores every session stored there.
    pub fn with_data_dir(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let store = Store::open(dir)?;
        let sessions = store
            .load_all()?
            .into_iter()
            .map(|(id, s)| (id, Arc::new(RwLock::new(s))))
            .collect();
        Ok(AppState {
            sessions: Arc::new(StdRwLock::new(sessions)),
            store: Some(store),
        })
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session map lock").len()
    }

    fn get(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    /// Runs a mutation on a blocking thread while holding the session's write
    /// lock, then journals it.
    async fn mutate(&self, id: &str, m: Mutation) -> Result<session::Outcome, ApiError> {
        let mut guard = self.get(id)?.write_owned().await;
        let store = self.store.clone();
        let id = id.to_string();
        tokio::task::spawn_blocking(move || {
            let out = guard.apply(&m)?;
            if let Some(store) = store {
                store.append(&id, &m)?;
            }
            Ok(out)
        })
        .await?
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/slice", get(slice))
        .route("/sessions/{id}/strokes", post(strokes))
        .route("/sessions/{id}/segment", post(segment))
        .route("/sessions/{id}/morph", post(morph))
        .route("/sessions/{id}/stats", get(stats))
        .route("/sessions/{id}/label", get(label))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

#[derive(Serialize)]
struct Created {
    session_id: String,
    dims: [usize; 3],
    spacing: [f64; 3],
    intensity_range: [f32; 2],
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let session = Session::from_nrrd(&body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    if let Some(store) = &state.store {
        store.create(&id, &body)?;
    }
    let grid = *session.volume.grid();
    let (lo, hi) = session.volume.intensity_range();
    state
        .sessions
        .write()
        .expect("session map lock")
        .insert(id.clone(), Arc::new(RwLock::new(session)));
    let body = Created {
        session_id: id,
        dims: grid.dims,
        spacing: grid.spacing,
        intensity_range: [lo, hi],
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

fn bad(msg: impl Into<String>) -> ApiError {
    ApiError::Session(SessionError::BadRequest(msg.into()))
}

fn param<T: std::str::FromStr>(
    q: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, ApiError> {
    q.get(key)
        .map(|s| s.parse().map_err(|_| bad(format!("bad {key}: {s:?}"))))
        .transpose()
}

async fn slice(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let shared = state.get(&id)?;
    let s = shared.read().await;
    let axis: Axis = param(&q, "axis")?.unwrap_or_default();
    let index: usize = param(&q, "index")?.ok_or_else(|| bad("missing index"))?;
    let (_, _, depth) = render::plane_shape(s.volume.grid().dims, axis);
    if index >= depth {
        return Err(bad(format!(
            "index {index} out of range for axis {axis:?} (size {depth})"
        )));
    }
    let raw = match q.get("format").map(String::as_str) {
        None | Some("png") => false,
        Some("raw") => true,
        Some(f) => return Err(bad(format!("unknown format {f:?}"))),
    };
    let (lo, hi) = s.volume.intensity_range();
    let window: f64 = param(&q, "window")?.unwrap_or(((hi - lo) as f64).max(1.0));
    let level: f64 = param(&q, "level")?.unwrap_or((lo as f64 + hi as f64) / 2.0);
    if !(window.is_finite() && window > 0.0 && level.is_finite()) {
        return Err(bad("window must be positive and level finite"));
    }
    let (slice, label) = match q.get("layer").map(String::as_str) {
        None | Some("image") => (
            render::image_slice(&s.volume, axis, index, window, level),
            false,
        ),
        Some("label") => (render::label_slice(s.label_layer(), axis, index), true),
        Some(l) => return Err(bad(format!("unknown layer {l:?}"))),
    };
    drop(s);
    let (bytes, mime) = match (raw, label) {
        (true, _) => (render::encode_raw(&slice), "application/octet-stream"),
        (false, false) => (render::encode_png_gray(&slice), "image/png"),
        (false, true) => (render::encode_png_labels(&slice), "image/png"),
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

async fn strokes(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    state.get(&id)?;
    let strokes = serde_json::from_slice(&body)?;
    let out = state.mutate(&id, Mutation::Strokes { strokes }).await?;
    Ok(Json(out).into_response())
}

async fn segment(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    state.get(&id)?;
    let config: GrowCutConfig = if body.iter().all(u8::is_ascii_whitespace) {
        GrowCutConfig::default()
    } else {
        serde_json::from_slice(&body)?
    };
    config.validate().map_err(SessionError::from)?;
    let out = state.mutate(&id, Mutation::Segment { config }).await?;
    Ok(Json(out).into_response())
}

async fn morph(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    state.get(&id)?;
    let req = serde_json::from_slice(&body)?;
    let out = state.mutate(&id, Mutation::Morph(req)).await?;
    Ok(Json(out).into_response())
}

async fn stats(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let shared = state.get(&id)?;
    let axis: Axis = param(&q, "axis")?.unwrap_or_default();
    let stats = shared.read().await.stats(axis)?;
    Ok(Json(stats).into_response())
}

async fn label(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let shared = state.get(&id)?;
    let s = shared.read().await;
    let bytes = encode_nrrd(s.result_mask()?);
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, data_dir: Option<PathBuf>) -> Result<(), ServeError> {
    let state = match data_dir {
        Some(d) => AppState::with_data_dir(d)?,
        None => AppState::in_memory(),
    };
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(addr: SocketAddr, data_dir: Option<PathBuf>) -> Result<(), ServeError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(addr, data_dir))
}
