//! HTTP/JSON API over immutable, loaded datasets.
//!
//! - `POST /api/scenario` evaluates a scenario request.
//! - `GET /api/capacity?lambda=` returns the capacity envelope.
//! - `GET /api/meta` describes the loaded datasets.
//!
//! Every endpoint answers 503 until the datasets are loaded and the default
//! capacity envelope has been solved.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use commute_grid::api::{self, ErrorBody, ScenarioRequest};
use commute_grid::grid::CapacityEnvelope;
use commute_grid::pipeline::{Inputs, PipelineError};
use lru::LruCache;
use tower_http::cors::{Any, CorsLayer};

const SCENARIO_CACHE: usize = 64;
const CAPACITY_CACHE: usize = 16;

struct Ready {
    inputs: Inputs,
    default_lambda: f64,
    meta: String,
}

struct CapacityEntry {
    envelope: CapacityEnvelope,
    body: String,
}

/// Shared server state. The datasets are written once; the caches are the
/// only mutable parts.
pub struct AppState {
    ready: OnceLock<Ready>,
    scenarios: Mutex<LruCache<String, Arc<String>>>,
    capacity: Mutex<LruCache<u64, Arc<CapacityEntry>>>,
}

impl Default for AppState {
    fn default() -> Self {
        Self::new()
    }
}

impl AppState {
    pub fn new() -> Self {
        Self {
            ready: OnceLock::new(),
            scenarios: Mutex::new(LruCache::new(NonZeroUsize::new(SCENARIO_CACHE).expect("non-zero"))),
            capacity: Mutex::new(LruCache::new(NonZeroUsize::new(CAPACITY_CACHE).expect("non-zero"))),
        }
    }

    pub fn is_ready(&self) -> bool {
        self.ready.get().is_some()
    }

    /// Solves the default capacity envelope and starts serving `inputs`.
    /// A second call is ignored.
    pub fn install(&self, inputs: Inputs) -> Result<(), PipelineError> {
        let default_lambda = inputs.settings.lambda;
        let entry = solve_capacity(&inputs, default_lambda)?;
        self.capacity.lock().expect("cache lock").put(default_lambda.to_bits(), Arc::new(entry));
        let meta = to_json(&api::meta(&inputs));
        if self.ready.set(Ready { inputs, default_lambda, meta }).is_ok() {
            tracing::info!(lambda = default_lambda, "datasets loaded");
        }
        Ok(())
    }

    /// Builds the datasets on a blocking thread and installs them.
    pub fn load_in_background<F>(self: &Arc<Self>, load: F) -> tokio::task::JoinHandle<Result<(), PipelineError>>
    where
        F: FnOnce() -> Result<Inputs, PipelineError> + Send + 'static,
    {
        let state = Arc::clone(self);
        tokio::task::spawn_blocking(move || {
            let res = load().and_then(|inputs| state.install(inputs));
            if let Err(e) = &res {
                tracing::error!(error = %e, "failed to load datasets");
            }
            res
        })
    }

    fn capacity_entry(&self, ready: &Ready, lambda: f64) -> Result<Arc<CapacityEntry>, PipelineError> {
        if let Some(hit) = self.capacity.lock().expect("cache lock").get(&lambda.to_bits()) {
            return Ok(Arc::clone(hit));
        }
        let entry = Arc::new(solve_capacity(&ready.inputs, lambda)?);
        self.capacity.lock().expect("cache lock").put(lambda.to_bits(), Arc::clone(&entry));
        Ok(entry)
    }

    fn scenario_body(&self, ready: &Ready, req: &ScenarioRequest) -> Result<Arc<String>, PipelineError> {
        let lambda = req.lambda.unwrap_or(ready.default_lambda);
        let key = to_json(&ScenarioRequest { lambda: Some(lambda), ..req.clone() });
        if let Some(hit) = self.scenarios.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let cap = self.capacity_entry(ready, lambda)?;
        let resp = api::scenario_response(&ready.inputs, req, lambda, &cap.envelope)?;
        let body = Arc::new(to_json(&resp));
        self.scenarios.lock().expect("cache lock").put(key, Arc::clone(&body));
        Ok(body)
    }
}

fn solve_capacity(inputs: &Inputs, lambda: f64) -> Result<CapacityEntry, PipelineError> {
    let resp = api::capacity_response(inputs, lambda)?;
    let body = to_json(&resp);
    Ok(CapacityEntry { envelope: resp.envelope, body })
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("api types serialize")
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/api/scenario", post(scenario))
        .route("/api/capacity", get(capacity))
        .route("/api/meta", get(meta))
        .layer(cors)
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(status: StatusCode, message: impl Into<String>, field: Option<String>) -> Response {
    json_response(status, to_json(&ErrorBody { error: message.into(), field }))
}

fn unavailable() -> Response {
    error(StatusCode::SERVICE_UNAVAILABLE, "datasets are still loading", None)
}

fn pipeline_error(e: PipelineError) -> Response {
    match e {
        PipelineError::Invalid(d) => error(StatusCode::BAD_REQUEST, d.message, Some(d.field)),
        other => {
            tracing::warn!(error = %other, "request failed");
            error(StatusCode::UNPROCESSABLE_ENTITY, other.to_string(), None)
        }
    }
}

async fn blocking<T, F>(f: F) -> Result<T, Response>
where
    F: FnOnce() -> Result<T, PipelineError> + Send + 'static,
    T: Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(pipeline_error),
        Err(e) => Err(error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), None)),
    }
}

async fn scenario(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let de = &mut serde_json::Deserializer::from_slice(&body);
    let req: ScenarioRequest = match serde_path_to_error::deserialize(de) {
        Ok(r) => r,
        Err(e) => {
            let path = e.path().to_string();
            let field = (path != ".").then_some(path);
            return error(StatusCode::BAD_REQUEST, e.into_inner().to_string(), field);
        }
    };
    if let Err(body) = req.validate() {
        return json_response(StatusCode::BAD_REQUEST, to_json(&body));
    }
    if !state.is_ready() {
        return unavailable();
    }
    let st = Arc::clone(&state);
    match blocking(move || {
        let ready = st.ready.get().expect("checked ready");
        st.scenario_body(ready, &req)
    })
    .await
    {
        Ok(body) => json_response(StatusCode::OK, body.as_str().to_owned()),
        Err(resp) => resp,
    }
}

async fn capacity(
    State(state): State<Arc<AppState>>,
    query: Result<Query<HashMap<String, String>>, axum::extract::rejection::QueryRejection>,
) -> Response {
    let Ok(Query(params)) = query else {
        return error(StatusCode::BAD_REQUEST, "malformed query string", None);
    };
    let lambda = match params.get("lambda").map(|s| s.parse::<f64>()) {
        None => None,
        Some(Ok(l)) if l.is_finite() && l >= 0.0 => Some(l),
        Some(_) => return error(StatusCode::BAD_REQUEST, "must be a finite number >= 0", Some("lambda".into())),
    };
    let Some(ready) = state.ready.get() else {
        return unavailable();
    };
    let lambda = lambda.unwrap_or(ready.default_lambda);
    let st = Arc::clone(&state);
    match blocking(move || st.capacity_entry(st.ready.get().expect("checked ready"), lambda)).await {
        Ok(entry) => json_response(StatusCode::OK, entry.body.clone()),
        Err(resp) => resp,
    }
}

async fn meta(State(state): State<Arc<AppState>>) -> Response {
    match state.ready.get() {
        Some(ready) => json_response(StatusCode::OK, ready.meta.clone()),
        None => unavailable(),
    }
}
