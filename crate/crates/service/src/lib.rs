//! HTTP service behind the LTS++ IDE: parsing and diagnostics, model
//! storage, graph and vocabulary lookups, and hypothesis generation in pages
//! of ten that resume a paused search.

pub mod api;
pub mod session;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hypforge_core::compile::compile;
use hypforge_core::model::{CostParams, ModelSpec, Trace};
use hypforge_core::search::{HypothesisStream, StreamStatus};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use uuid::Uuid;

use api::{
    analyze, ErrorBody, GenerateRequest, HypothesisItem, HypothesisPage, ModelRequest, ParsePayload, ParseRequest,
};
use session::{Session, SessionTable};
use store::{now_millis, ModelRecord, ModelStore, ParseSummary, StoreError};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub page_size: usize,
    pub session_ttl: Duration,
    /// Search time allowed for one page.
    pub page_budget: Duration,
    pub body_limit: usize,
    pub params: CostParams,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            page_size: 10,
            session_ttl: Duration::from_secs(600),
            page_budget: Duration::from_secs(60),
            body_limit: 1 << 20,
            params: CostParams::default(),
        }
    }
}

pub struct AppState {
    pub store: ModelStore,
    pub sessions: SessionTable,
    pub config: ServiceConfig,
}

impl AppState {
    pub fn new(store: ModelStore, config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self { store, sessions: SessionTable::new(config.session_ttl), config })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.config.body_limit;
    Router::new()
        .route("/parse", post(parse_source))
        .route("/models", post(create_model))
        .route("/models/{id}", get(get_model).put(update_model))
        .route("/models/{id}/parse", post(parse_model))
        .route("/models/{id}/graph", get(model_graph))
        .route("/models/{id}/vocabulary", get(model_vocabulary))
        .route("/models/{id}/hypotheses", post(generate))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Settings read from `HYPFORGE_PORT` (default 8080) and `HYPFORGE_STORE`
/// (default `hypforge-models.json`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Env {
    pub port: u16,
    pub store: PathBuf,
}

impl Env {
    pub fn from_env() -> Result<Self, String> {
        let port = match std::env::var("HYPFORGE_PORT") {
            Ok(p) => p.parse().map_err(|_| format!("HYPFORGE_PORT is not a port number: {p}"))?,
            Err(_) => 8080,
        };
        let store = std::env::var_os("HYPFORGE_STORE").map_or_else(|| "hypforge-models.json".into(), PathBuf::from);
        Ok(Self { port, store })
    }
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let sweeper = {
        let state = state.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_secs(30));
            loop {
                tick.tick().await;
                state.sessions.sweep();
            }
        })
    };
    let result = axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    sweeper.abort();
    result
}

// ---------------------------------------------------------------------------
// Errors

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { error: error.into(), message: message.into(), symbols: Vec::new() } }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown-model", format!("no model with id `{id}`"))
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        Self::internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn is_text(headers: &HeaderMap) -> bool {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/plain"))
}

/// Body read failures (mostly oversize) as JSON errors.
fn read_body(body: Result<Bytes, BytesRejection>) -> ApiResult<Bytes> {
    body.map_err(|r| {
        let code = if r.status() == StatusCode::PAYLOAD_TOO_LARGE { "too-large" } else { "bad-request" };
        ApiError::new(r.status(), code, r.body_text())
    })
}

fn json_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn text_body(body: &Bytes) -> ApiResult<String> {
    String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("request body is not UTF-8"))
}

fn record(state: &AppState, id: &str) -> ApiResult<ModelRecord> {
    state.store.get(id).ok_or_else(|| ApiError::not_found(id))
}

/// The stored model, or 409 when it does not parse.
fn valid_model(state: &AppState, id: &str) -> ApiResult<ModelSpec> {
    let r = record(state, id)?;
    analyze(&r.name, &r.source).1.ok_or_else(|| {
        ApiError::new(StatusCode::CONFLICT, "model-has-errors", format!("model `{id}` has parse errors"))
    })
}

// ---------------------------------------------------------------------------
// Handlers

/// Accepts `{"source": ...}` or a text/plain body. An empty body is an empty
/// model.
async fn parse_source(headers: HeaderMap, body: Result<Bytes, BytesRejection>) -> ApiResult<Json<ParsePayload>> {
    let body = read_body(body)?;
    let source = if is_text(&headers) || body.is_empty() {
        text_body(&body)?
    } else {
        json_body::<ParseRequest>(&body)?.source
    };
    Ok(Json(analyze("model", &source).0))
}

fn model_request(headers: &HeaderMap, body: &Bytes) -> ApiResult<ModelRequest> {
    if is_text(headers) {
        Ok(ModelRequest { source: text_body(body)?, name: None })
    } else {
        json_body(body)
    }
}

async fn create_model(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<(StatusCode, Json<ModelRecord>)> {
    let body = read_body(body)?;
    let req = model_request(&headers, &body)?;
    let name = req.name.unwrap_or_else(|| "model".into());
    let (payload, _) = analyze(&name, &req.source);
    let now = now_millis();
    let rec = ModelRecord {
        id: Uuid::new_v4().simple().to_string(),
        name,
        source: req.source,
        created: now,
        updated: now,
        last_parse: ParseSummary::of(&payload.diagnostics),
    };
    state.store.insert(rec.clone())?;
    Ok((StatusCode::CREATED, Json(rec)))
}

async fn update_model(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<ModelRecord>> {
    let body = read_body(body)?;
    let req = model_request(&headers, &body)?;
    let updated = state.store.update(&id, |r| {
        if let Some(name) = req.name {
            r.name = name;
        }
        r.last_parse = ParseSummary::of(&analyze(&r.name, &req.source).0.diagnostics);
        r.source = req.source;
        r.updated = now_millis();
    })?;
    updated.map(Json).ok_or_else(|| ApiError::not_found(&id))
}

async fn get_model(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<ModelRecord>> {
    record(&state, &id).map(Json)
}

async fn parse_model(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<ParsePayload>> {
    let r = record(&state, &id)?;
    let (payload, _) = analyze(&r.name, &r.source);
    let summary = ParseSummary::of(&payload.diagnostics);
    if summary != r.last_parse {
        state.store.update(&id, |r| r.last_parse = summary)?;
    }
    Ok(Json(payload))
}

async fn model_graph(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let model = valid_model(&state, &id)?;
    Ok(Json(hypforge_core::lts::render_graph(&model)).into_response())
}

async fn model_vocabulary(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Vec<String>>> {
    let model = valid_model(&state, &id)?;
    Ok(Json(model.observation_vocab().into_iter().collect()))
}

#[derive(Debug, Default, Deserialize)]
struct GenerateQuery {
    token: Option<String>,
}

/// JSON `{"trace": [...] | "lines", "token": ...}`, or a text/plain trace
/// upload with the token in the query string.
async fn generate(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<GenerateQuery>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<HypothesisPage>> {
    let body = read_body(body)?;
    let mut req = if is_text(&headers) {
        GenerateRequest { trace: Some(api::TraceInput::Lines(text_body(&body)?)), ..GenerateRequest::default() }
    } else if body.is_empty() {
        GenerateRequest::default()
    } else {
        json_body(&body)?
    };
    if req.token.is_none() {
        req.token = query.token;
    }

    if req.page == Some(0) {
        return Err(ApiError::bad_request("pages are numbered from 1"));
    }
    if req.page.is_some() && req.token.is_some() {
        return Err(ApiError::bad_request("give either a page number or a generation token"));
    }
    let skip_pages = req.page.map_or(0, |p| p - 1);

    let (token, session) = match req.token {
        Some(t) => {
            let token = Uuid::parse_str(&t).map_err(|_| ApiError::bad_request("generation token is not a UUID"))?;
            let session = state.sessions.get(&token).ok_or_else(|| {
                ApiError::new(StatusCode::GONE, "token-expired", "generation token expired or unknown; generate again")
            })?;
            if session.lock().model_id != id {
                return Err(ApiError::bad_request("generation token belongs to another model"));
            }
            (token, session)
        }
        None => {
            let model = valid_model(&state, &id)?;
            let trace = req.trace.map(api::TraceInput::into_trace).unwrap_or_default();
            start_session(&state, id, model, trace)?
        }
    };

    let page_size = state.config.page_size;
    let budget = state.config.page_budget;
    let page = tokio::task::spawn_blocking(move || {
        let mut s = session.lock();
        let skip = skip_pages.saturating_mul(page_size);
        let status = s.stream.fill(skip.saturating_add(page_size + 1), budget, None);
        s.stream.take(skip);
        s.pages_served += skip_pages;
        let hyps = s.stream.take(page_size);
        let has_next = status != StreamStatus::Exhausted || s.stream.buffered() > 0;
        s.pages_served += 1;
        let items = hyps.iter().map(|h| HypothesisItem::render(&s.model, &s.trace, h)).collect();
        HypothesisPage {
            page_index: s.pages_served,
            items,
            has_next,
            complete: status != StreamStatus::Interrupted,
            generation_token: has_next.then(|| token.to_string()),
        }
    })
    .await
    .map_err(|e| ApiError::internal(format!("search task failed: {e}")))?;

    if page.has_next {
        state.sessions.touch(&token);
    } else {
        state.sessions.remove(&token);
    }
    Ok(Json(page))
}

type Started = (Uuid, Arc<parking_lot::Mutex<Session>>);

fn start_session(state: &AppState, model_id: String, model: ModelSpec, trace: Trace) -> ApiResult<Started> {
    let unknown = trace.unknown_symbols(&model);
    if !unknown.is_empty() {
        let symbols: Vec<String> = unknown.iter().map(|(_, s)| s.clone()).collect();
        let listed: Vec<String> = unknown.iter().map(|(i, s)| format!("`{s}` at position {i}")).collect();
        let mut err = ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "unknown-observation",
            format!("unknown observation symbol {}", listed.join(", ")),
        );
        err.body.symbols = symbols;
        return Err(err);
    }
    let problem = compile(&model, &trace, &state.config.params).map_err(|e| ApiError::internal(e.to_string()))?;
    let stream = HypothesisStream::new(Arc::new(problem)).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(state.sessions.insert(Session { model_id, model: Arc::new(model), trace, stream, pages_served: 0 }))
}
