use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chartalk_core::agent::{
    assemble_system_prompt, chat, suggest_prompts, AgentMode, ChatEvent, ChatSession, LlmProvider, MockTranscript,
    OpenAiProvider, OpenAiVlm, PromptBundle, ScriptedProvider, StubVlm, VlmProvider,
};
use chartalk_core::chart::ChartSpec;
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, Mutex};
use tower_http::cors::{Any, CorsLayer};

use crate::config::{ProviderKind, ServiceConfig, VlmKind};
use crate::error::ApiError;
use crate::pipeline::prepare_chart;
use crate::store::{Store, StoreError, StoredChart};

const MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;

struct SessionSlot {
    chart_id: String,
    /// Held for the whole of a streamed turn.
    busy: Arc<Mutex<()>>,
    /// Committed state; a turn lands here only after it is on disk.
    state: RwLock<ChatSession>,
}

struct Inner {
    config: ServiceConfig,
    store: Store,
    charts: RwLock<HashMap<String, Arc<StoredChart>>>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    provider: Arc<dyn LlmProvider>,
    vlm: Option<Arc<dyn VlmProvider>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("mock transcript: {0}")]
    Mock(String),
}

/// Chat provider named by the config.
pub fn provider_from_config(config: &ServiceConfig) -> Result<Arc<dyn LlmProvider>, StartupError> {
    Ok(match config.provider.kind {
        ProviderKind::Openai => Arc::new(OpenAiProvider::new(config.provider.connection())),
        ProviderKind::Mock => {
            let path = config
                .provider
                .mock_transcript
                .as_ref()
                .ok_or_else(|| StartupError::Mock("provider.kind = \"mock\" needs provider.mock_transcript".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| StartupError::Mock(format!("{}: {e}", path.display())))?;
            let script = MockTranscript::from_json(&text).map_err(|e| StartupError::Mock(format!("{}: {e}", path.display())))?;
            Arc::new(ScriptedProvider::new(script))
        }
    })
}

pub fn vlm_from_config(config: &ServiceConfig) -> Option<Arc<dyn VlmProvider>> {
    match config.provider.vlm {
        VlmKind::Off => None,
        VlmKind::Stub => Some(Arc::new(StubVlm::default())),
        VlmKind::Openai => Some(Arc::new(OpenAiVlm::new(config.provider.connection()))),
    }
}

impl AppState {
    /// Opens the store and loads every chart and session in it.
    pub fn new(
        config: ServiceConfig,
        provider: Arc<dyn LlmProvider>,
        vlm: Option<Arc<dyn VlmProvider>>,
    ) -> Result<Self, StartupError> {
        config.check_storage()?;
        let store = Store::open(&config.storage_dir)?;
        let mut charts = HashMap::new();
        let mut sessions = HashMap::new();
        for id in store.chart_ids()? {
            let chart = match store.load_chart(&id) {
                Ok(c) => c,
                Err(e) => {
                    tracing::error!("skipping chart {id}: {e}");
                    continue;
                }
            };
            match store.load_sessions(&id) {
                Ok(list) => {
                    for s in list {
                        sessions.insert(s.id.clone(), Arc::new(slot(s)));
                    }
                }
                Err(e) => tracing::error!("sessions of chart {id}: {e}"),
            }
            charts.insert(id, Arc::new(chart));
        }
        tracing::info!("loaded {} charts and {} sessions", charts.len(), sessions.len());
        Ok(Self {
            inner: Arc::new(Inner {
                config,
                store,
                charts: RwLock::new(charts),
                sessions: RwLock::new(sessions),
                provider,
                vlm,
            }),
        })
    }

    pub fn from_config(config: ServiceConfig) -> Result<Self, StartupError> {
        let provider = provider_from_config(&config)?;
        let vlm = vlm_from_config(&config);
        Self::new(config, provider, vlm)
    }

    fn chart(&self, id: &str) -> Result<Arc<StoredChart>, ApiError> {
        self.inner
            .charts
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("chart `{id}`")))
    }

    fn session(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.inner
            .sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("session `{id}`")))
    }
}

fn slot(s: ChatSession) -> SessionSlot {
    SessionSlot {
        chart_id: s.chart_id.clone(),
        busy: Arc::new(Mutex::new(())),
        state: RwLock::new(s),
    }
}

fn cors(config: &ServiceConfig) -> CorsLayer {
    let origins: Vec<HeaderValue> = config.cors_origins.iter().filter_map(|o| o.parse().ok()).collect();
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    if origins.is_empty() {
        layer.allow_origin(Any)
    } else {
        layer.allow_origin(origins)
    }
}

pub fn router(state: AppState) -> Router {
    let cors = cors(&state.inner.config);
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/charts", post(create_chart))
        .route("/charts/{id}/svg", get(get_svg))
        .route("/charts/{id}/elements", get(get_elements))
        .route("/charts/{id}/knowledge", get(get_knowledge))
        .route("/charts/{id}/suggestions", get(get_suggestions))
        .route("/charts/{id}/sessions", post(create_session))
        .route("/sessions/{sid}", get(get_session))
        .route("/sessions/{sid}/messages", post(post_message))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .layer(cors)
        .with_state(state)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatedChart {
    pub chart_id: String,
}

async fn create_chart(State(st): State<AppState>, mut form: Multipart) -> Result<Response, ApiError> {
    let mut csv = None;
    let mut spec = None;
    let mut description = None;
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request("invalid_multipart", e.to_string()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request("invalid_multipart", e.to_string()))?;
        match name.as_str() {
            "csv" => csv = Some(bytes.to_vec()),
            "spec" => {
                let s: ChartSpec = serde_json::from_slice(&bytes)
                    .map_err(|e| ApiError::bad_request("invalid_spec", format!("chart spec: {e}")))?;
                spec = Some(s);
            }
            "description" => description = Some(String::from_utf8_lossy(&bytes).into_owned()),
            other => return Err(ApiError::bad_request("invalid_multipart", format!("unexpected field `{other}`"))),
        }
    }
    let csv = csv.ok_or_else(|| ApiError::bad_request("invalid_multipart", "missing field `csv`"))?;
    let spec = spec.ok_or_else(|| ApiError::bad_request("invalid_multipart", "missing field `spec`"))?;

    let chart_id = uuid::Uuid::new_v4().simple().to_string();
    let new = prepare_chart(chart_id.clone(), csv, spec, description, st.inner.vlm.as_deref()).await?;
    let store = st.inner.store.clone();
    let stored = tokio::task::spawn_blocking(move || store.commit_chart(new))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    st.inner.charts.write().unwrap().insert(chart_id.clone(), Arc::new(stored));
    Ok((StatusCode::CREATED, Json(CreatedChart { chart_id })).into_response())
}

fn body(content_type: &'static str, text: &str) -> Response {
    ([(header::CONTENT_TYPE, content_type)], text.to_string()).into_response()
}

async fn get_svg(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(body("image/svg+xml", &st.chart(&id)?.svg))
}

async fn get_elements(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(body("application/json", &st.chart(&id)?.elements_json))
}

async fn get_knowledge(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(body("application/json", &st.chart(&id)?.knowledge_json))
}

#[derive(Debug, Deserialize)]
struct SuggestionQuery {
    session: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestions {
    pub suggestions: Vec<String>,
}

async fn get_suggestions(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SuggestionQuery>,
) -> Result<Json<Suggestions>, ApiError> {
    let chart = st.chart(&id)?;
    let turns = match q.session {
        Some(sid) => {
            let slot = st.session(&sid)?;
            if slot.chart_id != id {
                return Err(ApiError::NotFound(format!("session `{sid}` of chart `{id}`")));
            }
            let n = slot.state.read().unwrap().turns.len();
            n
        }
        None => 0,
    };
    Ok(Json(Suggestions {
        suggestions: suggest_prompts(&chart.document, turns),
    }))
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    mode: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
    pub chart_id: String,
    pub mode: AgentMode,
}

async fn create_session(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SessionQuery>,
) -> Result<Response, ApiError> {
    let chart = st.chart(&id)?;
    let mode: AgentMode = match q.mode.as_deref() {
        None => AgentMode::Full,
        Some(m) => m.parse().map_err(|e: String| ApiError::bad_request("invalid_mode", e))?,
    };
    let profile = st.inner.config.profile(mode);
    let bundle = PromptBundle::new(
        &chart.document,
        chart.knowledge.knowledge.clone(),
        chart.knowledge.data.clone(),
        chart.record.data_description.clone(),
        chart.record.visual_features.clone(),
    );
    let prompt = assemble_system_prompt(&bundle, &profile).map_err(|e| ApiError::Internal(e.to_string()))?;
    let session = ChatSession::new(uuid::Uuid::new_v4().simple().to_string(), id.clone(), profile, prompt);
    st.inner.store.create_session(&session)?;
    let created = CreatedSession {
        session_id: session.id.clone(),
        chart_id: id,
        mode,
    };
    st.inner
        .sessions
        .write()
        .unwrap()
        .insert(session.id.clone(), Arc::new(slot(session)));
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn get_session(State(st): State<AppState>, Path(sid): Path<String>) -> Result<Json<ChatSession>, ApiError> {
    let slot = st.session(&sid)?;
    let s = slot.state.read().unwrap().clone();
    Ok(Json(s))
}

fn event_name(ev: &ChatEvent) -> &'static str {
    match ev {
        ChatEvent::TextDelta { .. } => "text-delta",
        ChatEvent::Citation { .. } => "citation",
        ChatEvent::Done { .. } => "done",
        ChatEvent::Error { .. } => "error",
    }
}

async fn post_message(State(st): State<AppState>, Path(sid): Path<String>, text: String) -> Result<Response, ApiError> {
    let slot = st.session(&sid)?;
    if text.trim().is_empty() {
        return Err(ApiError::bad_request("empty_message", "message body is empty"));
    }
    let guard = slot
        .busy
        .clone()
        .try_lock_owned()
        .map_err(|_| ApiError::Conflict(format!("session `{sid}` is already answering a message")))?;
    let chart = st.chart(&slot.chart_id)?;
    let mut working = slot.state.read().unwrap().clone();
    let (tx, rx) = mpsc::unbounded_channel::<ChatEvent>();
    let inner = st.inner.clone();
    let timeout = Duration::from_secs(inner.config.turn_timeout_secs);

    tokio::spawn(async move {
        let _guard = guard;
        let mut done = None;
        let sink = tx.clone();
        let turn = chat(&mut working, &chart.document, &text, inner.provider.as_ref(), |ev| match ev {
            // Held back until the turn is on disk.
            ChatEvent::Done { .. } => {
                done = Some(ev);
                true
            }
            other => sink.send(other).is_ok(),
        });
        match tokio::time::timeout(timeout, turn).await {
            Err(_) => {
                let _ = tx.send(ChatEvent::Error {
                    message: format!("no complete reply within {} s", timeout.as_secs()),
                });
            }
            Ok(Err(_)) => {}
            Ok(Ok(turn)) => match inner.store.append_turn(&slot.chart_id, &sid, &turn) {
                Ok(()) => {
                    slot.state.write().unwrap().turns.push(turn);
                    if let Some(d) = done {
                        let _ = tx.send(d);
                    }
                }
                Err(e) => {
                    let _ = tx.send(ChatEvent::Error {
                        message: format!("could not save the turn: {e}"),
                    });
                }
            },
        }
    });

    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let ev = rx.recv().await?;
        let event = Event::default()
            .event(event_name(&ev))
            .json_data(&ev)
            .expect("event serializes");
        Some((Ok::<_, Infallible>(event), rx))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()).into_response())
}
