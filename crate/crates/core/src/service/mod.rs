//! Session-based HTTP API, the CFG-vs-IN ablation sweep and CLI helpers.
//!
//! ```text
//! POST /sessions                  {"image": <base64 PNG>, "instruction": str, "seed"?: int}
//! GET  /sessions/{id}
//! POST /sessions/{id}/plan/{k}
//! POST /sessions/{id}/step
//! POST /sessions/{id}/repeat      {"backends"?: ["role=url"], "args"?: {"2": 4.0}}
//! GET  /sessions/{id}/trace       ?format=html for the report page
//! GET  /artifacts/{digest}        image/png
//! ```
//!
//! Errors are `{"code", "message", "line"?}` with `code` from [`ErrorCode`].

mod ablate;
pub mod cli;
mod error;

use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as JsonValue};

use crate::backends::{invoke, plan_with_registry, BackendError, ProviderBinding, ProviderCall, Registry};
use crate::dsl::Arg;
use crate::executor::{self, trace_json, ArtifactStore, ExecutionState, Overrides, StepTrace, Value};
use crate::geometry::{GeometryError, ImageBuffer};
use crate::planner::{PlanCandidate, SceneSummary};

pub use ablate::{ablate, rms, write_ablation, AblateError, AblationOutput, AblationReport, DEFAULT_SWEEP};
pub use error::{ApiError, ErrorCode};

/// Sessions kept before the least recently used one is dropped.
pub const SESSION_CAP: usize = 64;

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub image: ImageBuffer,
    pub instruction: String,
    pub plans: Vec<PlanCandidate>,
    pub selected_plan: Option<usize>,
    pub state: Option<ExecutionState>,
    pub seed: u64,
    pub created_at: u64,
}

impl Session {
    pub fn summary(&self) -> JsonValue {
        let plans: Vec<JsonValue> = self
            .plans
            .iter()
            .enumerate()
            .map(|(i, p)| json!({ "index": i, "program": p.program.to_string(), "provenance": p.provenance, "edges": p.dataflow.edges }))
            .collect();
        let program_len = self.selected_plan.map(|k| self.plans[k].program.len());
        let pc = self.state.as_ref().map(|s| s.pc);
        json!({
            "id": self.id,
            "instruction": self.instruction,
            "width": self.image.width(),
            "height": self.image.height(),
            "seed": self.seed,
            "created_at": self.created_at,
            "plans": plans,
            "selected_plan": self.selected_plan,
            "pc": pc,
            "program_len": program_len,
            "done": matches!((pc, program_len), (Some(a), Some(b)) if a >= b),
        })
    }

    fn running(&mut self) -> Result<(&PlanCandidate, &mut ExecutionState), ApiError> {
        match (self.selected_plan, self.state.as_mut()) {
            (Some(k), Some(state)) => Ok((&self.plans[k], state)),
            _ => Err(ApiError::new(ErrorCode::NoPlanSelected, "select a plan first")),
        }
    }
}

type SessionRef = Arc<Mutex<Session>>;

/// Insertion-ordered table; lookups move the entry to the back and inserts
/// evict from the front once [`SESSION_CAP`] is reached.
#[derive(Default)]
pub struct SessionTable {
    entries: IndexMap<String, SessionRef>,
}

impl SessionTable {
    pub fn insert(&mut self, session: Session) -> SessionRef {
        if self.entries.len() >= SESSION_CAP {
            self.entries.shift_remove_index(0);
        }
        let id = session.id.clone();
        let r = Arc::new(Mutex::new(session));
        self.entries.insert(id, r.clone());
        r
    }

    pub fn get(&mut self, id: &str) -> Option<SessionRef> {
        let i = self.entries.get_index_of(id)?;
        let last = self.entries.len() - 1;
        self.entries.move_index(i, last);
        Some(self.entries[last].clone())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Shared server state.
#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
    pub store: ArtifactStore,
    sessions: Arc<Mutex<SessionTable>>,
}

impl AppState {
    pub fn new(registry: Registry) -> Self {
        Self { registry: Arc::new(registry), store: ArtifactStore::new(), sessions: Arc::default() }
    }

    pub fn session_count(&self) -> usize {
        lock(&self.sessions).len()
    }

    fn session(&self, id: &str) -> Result<SessionRef, ApiError> {
        lock(&self.sessions)
            .get(id)
            .ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("no session `{id}`")))
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/plan/{k}", post(select_plan))
        .route("/sessions/{id}/step", post(session_step))
        .route("/sessions/{id}/repeat", post(session_repeat))
        .route("/sessions/{id}/trace", get(session_trace))
        .route("/artifacts/{digest}", get(get_artifact))
        .with_state(state)
}

/// Bind and serve the API until the process is stopped.
pub async fn serve(addr: SocketAddr, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app).await
}

/// Segment the image with the bound segmenter for the planner's scene view.
/// A uniform image yields an empty scene.
pub fn scene_summary(registry: &Registry, image: &ImageBuffer) -> Result<SceneSummary, BackendError> {
    let size = image.dims();
    match invoke(registry, &ProviderCall::Segment(image.clone())) {
        Ok(Value::RegionList(rois)) => Ok(SceneSummary::from_rois(&rois, size)),
        Ok(_) => unreachable!("segmenter results are checked by the backend"),
        Err(BackendError::Geometry(GeometryError::NoForeground)) => Ok(SceneSummary::from_rois(&[], size)),
        Err(e) => Err(e),
    }
}

/// Decode, plan and build a session.
pub fn create(registry: &Registry, png: &[u8], instruction: &str, seed: u64) -> Result<Session, ApiError> {
    let image = ImageBuffer::from_png(png).map_err(|e| ApiError::new(ErrorCode::BadImage, e.to_string()))?;
    if instruction.trim().is_empty() {
        return Err(ApiError::new(ErrorCode::BadRequest, "instruction is empty"));
    }
    let scene = scene_summary(registry, &image).map_err(ApiError::from_plan)?;
    let plans = plan_with_registry(registry, instruction, &scene).map_err(ApiError::from_plan)?;
    let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Ok(Session {
        id: uuid::Uuid::new_v4().simple().to_string(),
        image,
        instruction: instruction.to_string(),
        plans,
        selected_plan: None,
        state: None,
        seed,
        created_at,
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(ApiError::new(ErrorCode::Internal, e.to_string())))
}

#[derive(Deserialize)]
struct CreateBody {
    image: String,
    instruction: String,
    #[serde(default)]
    seed: u64,
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(ErrorCode::BadRequest, e.to_string()))
}

async fn create_session(State(app): State<AppState>, body: axum::body::Bytes) -> Result<Json<JsonValue>, ApiError> {
    let body: CreateBody = parse_body(&body)?;
    let png = base64::engine::general_purpose::STANDARD
        .decode(body.image.trim())
        .map_err(|e| ApiError::new(ErrorCode::BadImage, format!("image is not base64: {e}")))?;
    let registry = app.registry.clone();
    let session = blocking(move || create(&registry, &png, &body.instruction, body.seed)).await?;
    let summary = session.summary();
    lock(&app.sessions).insert(session);
    Ok(Json(summary))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<JsonValue>, ApiError> {
    let s = app.session(&id)?;
    let summary = lock(&s).summary();
    Ok(Json(summary))
}

async fn select_plan(
    State(app): State<AppState>,
    Path((id, k)): Path<(String, String)>,
) -> Result<Json<JsonValue>, ApiError> {
    let s = app.session(&id)?;
    let mut s = lock(&s);
    let k: usize = k
        .parse()
        .ok()
        .filter(|&k| k < s.plans.len())
        .ok_or_else(|| ApiError::new(ErrorCode::IndexOutOfRange, format!("plan `{k}` not in 0..{}", s.plans.len())))?;
    let state = executor::init_state(s.image.clone(), s.seed)?;
    s.selected_plan = Some(k);
    s.state = Some(state);
    Ok(Json(s.summary()))
}

fn step_response(trace: &StepTrace, state: &ExecutionState, len: usize) -> JsonValue {
    let urls: Vec<String> = trace.artifacts.iter().map(|a| format!("/artifacts/{a}")).collect();
    json!({ "step": trace, "artifact_urls": urls, "pc": state.pc, "done": state.pc >= len })
}

async fn session_step(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<JsonValue>, ApiError> {
    let s = app.session(&id)?;
    let (registry, store) = (app.registry.clone(), app.store.clone());
    blocking(move || {
        let mut s = lock(&s);
        let (plan, state) = s.running()?;
        let trace = executor::step(state, &plan.program, &registry, &store)?;
        Ok(Json(step_response(&trace, state, plan.program.len())))
    })
    .await
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RepeatBody {
    #[serde(default)]
    backends: Vec<String>,
    #[serde(default)]
    args: std::collections::BTreeMap<usize, JsonValue>,
}

impl RepeatBody {
    fn overrides(&self) -> Result<Overrides, ApiError> {
        let bindings = self
            .backends
            .iter()
            .map(|b| ProviderBinding::parse(b))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ApiError::new(ErrorCode::InvalidOverride, e.to_string()))?;
        let mut args = std::collections::BTreeMap::new();
        for (&i, v) in &self.args {
            let arg = match v {
                JsonValue::Number(n) => Arg::Number(n.as_f64().unwrap_or(f64::NAN)),
                JsonValue::String(s) => Arg::Str(s.clone()),
                other => return Err(ApiError::new(ErrorCode::InvalidOverride, format!("argument {i}: unsupported {other}"))),
            };
            args.insert(i, arg);
        }
        Ok(Overrides { bindings, args })
    }
}

async fn session_repeat(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> Result<Json<JsonValue>, ApiError> {
    let body: RepeatBody = if body.iter().all(u8::is_ascii_whitespace) { RepeatBody::default() } else { parse_body(&body)? };
    let overrides = body.overrides()?;
    let s = app.session(&id)?;
    let (registry, store) = (app.registry.clone(), app.store.clone());
    blocking(move || {
        let mut s = lock(&s);
        let (plan, state) = s.running()?;
        let trace = executor::repeat(state, &plan.program, &registry, &store, &overrides)?;
        Ok(Json(step_response(&trace, state, plan.program.len())))
    })
    .await
}

#[derive(Deserialize)]
struct TraceQuery {
    format: Option<String>,
}

async fn session_trace(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TraceQuery>,
) -> Result<Response, ApiError> {
    let s = app.session(&id)?;
    let history = lock(&s).state.as_ref().map(|st| st.history.clone()).unwrap_or_default();
    match q.format.as_deref() {
        None | Some("json") => {
            let v: JsonValue = serde_json::from_str(&trace_json(&history)).expect("trace json is valid");
            Ok(Json(v).into_response())
        }
        Some("html") => {
            let store = app.store.clone();
            let report = blocking(move || Ok(executor::render_trace(&history, &store)?)).await?;
            Ok(Html(report.html).into_response())
        }
        Some(other) => Err(ApiError::new(ErrorCode::BadRequest, format!("unknown format `{other}`"))),
    }
}

async fn get_artifact(State(app): State<AppState>, Path(digest): Path<String>) -> Result<Response, ApiError> {
    let bytes = app
        .store
        .get(&digest)
        .ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("no artifact `{digest}`")))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes.as_ref().clone()).into_response())
}

/// Summary shape returned by the session endpoints, for clients.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub instruction: String,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub created_at: u64,
    pub plans: Vec<PlanSummary>,
    pub selected_plan: Option<usize>,
    pub pc: Option<usize>,
    pub program_len: Option<usize>,
    pub done: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanSummary {
    pub index: usize,
    pub program: String,
    pub provenance: crate::planner::Provenance,
    pub edges: Vec<(usize, usize)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy(id: &str) -> Session {
        Session {
            id: id.into(),
            image: ImageBuffer::filled(2, 2, [0; 4]).unwrap(),
            instruction: String::new(),
            plans: Vec::new(),
            selected_plan: None,
            state: None,
            seed: 0,
            created_at: 0,
        }
    }

    #[test]
    fn table_evicts_least_recently_used() {
        let mut t = SessionTable::default();
        for i in 0..SESSION_CAP {
            t.insert(dummy(&i.to_string()));
        }
        assert!(t.get("0").is_some());
        t.insert(dummy("new"));
        assert_eq!(t.len(), SESSION_CAP);
        assert!(t.get("0").is_some());
        assert!(t.get("1").is_none());
        assert!(t.get("new").is_some());
    }

    #[test]
    fn summary_parses_as_typed_shape() {
        let s = dummy("x");
        let typed: SessionSummary = serde_json::from_value(s.summary()).unwrap();
        assert_eq!(typed.id, "x");
        assert_eq!(typed.pc, None);
        assert!(!typed.done);
    }

    #[test]
    fn corrupt_png_is_bad_image() {
        let err = create(&Registry::stubs(), b"not a png", "remove the dog", 0).unwrap_err();
        assert_eq!(err.code, ErrorCode::BadImage);
    }
}
