//! HTTP front end over a loaded [`Engine`].
//!
//! The router is live before the models are: `/health` answers 503 and the
//! api routes answer 503 until [`AppState::install`] publishes the engine.
//! After that all state is immutable and requests never mutate it.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use agreesearch_core::corpus::{ArticleId, StanceLabel};
use agreesearch_core::pipeline::{Engine, ListSizes, QueryResult, RankedItem, DEFAULT_POOL_SIZE, MODEL_FILES};
use agreesearch_core::stancenet::KeySentence;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tower_http::cors::{Any, CorsLayer};

struct Loaded {
    engine: Engine,
    hashes: BTreeMap<String, String>,
}

/// Shared, write-once service state.
#[derive(Clone)]
pub struct AppState {
    loaded: Arc<OnceLock<Loaded>>,
    pool_size: usize,
}

impl Default for AppState {
    fn default() -> Self {
        AppState {
            loaded: Arc::default(),
            pool_size: DEFAULT_POOL_SIZE,
        }
    }
}

impl AppState {
    /// State whose routes answer 503 until [`AppState::install`].
    pub fn loading() -> Self {
        Self::default()
    }

    /// Candidates retrieved for requests that carry no explicit pool.
    pub fn with_pool_size(mut self, pool_size: usize) -> Self {
        self.pool_size = pool_size;
        self
    }

    pub fn ready(engine: Engine, hashes: BTreeMap<String, String>) -> Self {
        let state = Self::loading();
        state.install(engine, hashes);
        state
    }

    /// Publishes the engine. Later calls are ignored and return false.
    pub fn install(&self, engine: Engine, hashes: BTreeMap<String, String>) -> bool {
        self.loaded.set(Loaded { engine, hashes }).is_ok()
    }

    pub fn is_ready(&self) -> bool {
        self.loaded.get().is_some()
    }
}

/// SHA-256 of every model file in `dir`, hex encoded, keyed by file name.
pub fn hash_model_dir(dir: impl AsRef<Path>) -> std::io::Result<BTreeMap<String, String>> {
    let dir = dir.as_ref();
    let mut out = BTreeMap::new();
    for name in MODEL_FILES {
        let bytes = std::fs::read(dir.join(name))?;
        out.insert(name.to_string(), hex::encode(Sha256::digest(&bytes)));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub question: String,
    #[serde(default)]
    pub pool: Option<Vec<ArticleId>>,
    /// Agree, disagree and discuss list caps.
    #[serde(default)]
    pub sizes: Option<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseItem {
    pub article_id: ArticleId,
    pub title: String,
    pub label: StanceLabel,
    pub p: f64,
    pub rel: f64,
    pub beta: Option<f64>,
    pub key_sentences: Vec<KeySentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub agree: Vec<ResponseItem>,
    pub disagree: Vec<ResponseItem>,
    pub discuss: Vec<ResponseItem>,
    pub timing_ms: f64,
}

impl QueryResponse {
    pub fn new(result: QueryResult, timing_ms: f64) -> Self {
        let items = |list: Vec<RankedItem>| {
            list.into_iter()
                .map(|it| ResponseItem {
                    article_id: it.article_id,
                    title: it.title,
                    label: it.verdict.label,
                    p: it.verdict.p,
                    rel: it.verdict.rel,
                    beta: it.verdict.beta,
                    key_sentences: it.key_sentences,
                })
                .collect()
        };
        QueryResponse {
            agree: items(result.agree),
            disagree: items(result.disagree),
            discuss: items(result.discuss),
            timing_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleResponse {
    pub id: ArticleId,
    pub title: String,
    pub text: String,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub models: BTreeMap<String, String>,
    pub articles: usize,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

fn not_loaded() -> Response {
    error(StatusCode::SERVICE_UNAVAILABLE, "models are still loading")
}

async fn query(State(state): State<AppState>, body: Result<Json<QueryRequest>, JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    if req.question.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "question must not be empty");
    }
    if !state.is_ready() {
        return not_loaded();
    }
    let sizes = req
        .sizes
        .map_or_else(ListSizes::default, |[agree, disagree, discuss]| ListSizes {
            agree,
            disagree,
            discuss,
        });
    let work = tokio::task::spawn_blocking(move || {
        let loaded = state.loaded.get().expect("checked above");
        let start = Instant::now();
        if let Some(ids) = &req.pool {
            if let Some(id) = ids.iter().find(|id| loaded.engine.articles().get(**id).is_none()) {
                return Err((StatusCode::BAD_REQUEST, format!("unknown article id {id}")));
            }
        }
        match loaded
            .engine
            .query(&req.question, req.pool.as_deref(), sizes, state.pool_size)
        {
            Ok(result) => Ok(QueryResponse::new(result, start.elapsed().as_secs_f64() * 1e3)),
            Err(e) => Err((StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
        }
    });
    match work.await {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err((status, message))) => error(status, message),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn article(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(loaded) = state.loaded.get() else {
        return not_loaded();
    };
    let found = id
        .parse::<ArticleId>()
        .ok()
        .and_then(|id| loaded.engine.articles().get(id));
    match found {
        Some(a) => Json(ArticleResponse {
            id: a.id,
            title: a.title().to_string(),
            text: a.text.clone(),
            sentences: a.sentences().to_vec(),
        })
        .into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no article {id}")),
    }
}

async fn health(State(state): State<AppState>) -> Response {
    match state.loaded.get() {
        Some(loaded) => Json(HealthResponse {
            status: "ok".into(),
            models: loaded.hashes.clone(),
            articles: loaded.engine.articles().len(),
        })
        .into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(HealthResponse {
                status: "loading".into(),
                models: BTreeMap::new(),
                articles: 0,
            }),
        )
            .into_response(),
    }
}

/// CORS for `origin`, or for any origin when `None`.
pub fn cors(origin: Option<&str>) -> Result<CorsLayer, String> {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    Ok(match origin {
        None | Some("*") => layer.allow_origin(Any),
        Some(o) => layer.allow_origin(HeaderValue::from_str(o).map_err(|e| format!("bad cors origin {o:?}: {e}"))?),
    })
}

pub fn router(state: AppState, cors: CorsLayer) -> Router {
    Router::new()
        .route("/api/query", post(query))
        .route("/api/article/:id", get(article))
        .route("/health", get(health))
        .layer(cors)
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState, cors: CorsLayer) -> std::io::Result<()> {
    axum::serve(listener, router(state, cors)).await
}
