//! JSON-over-HTTP API.
//!
//! Read endpoints share one immutable [`Engine`] behind an `Arc`. Graph
//! builds run one at a time on the blocking pool and write new files; a
//! finished build replaces the served engine only when asked to.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use argweave_core::annindex::IndexMode;
use argweave_core::corpus::{load_corpus, parse_corpus, Granularity};
use argweave_core::embedding::VectorFile;
use argweave_core::queryfilter::Position;
use argweave_core::semgraph::{graph_stats, graph_to_bytes, GraphStats};
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::{build_pipeline, write_file, BuildSettings, CaseRequest, DataPaths, Engine, EngineError};

const DEFAULT_QUERY_LIMIT: usize = 20;
const DEFAULT_TOP_MEMBERS: usize = 5;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    position: Option<Position>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), position: None }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "INVALID_REQUEST", message)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = if e.is_validation() {
            StatusCode::BAD_REQUEST
        } else {
            match e {
                EngineError::Case(_) | EngineError::Corpus(_) | EngineError::NoQueryEmbedder(_) => {
                    StatusCode::UNPROCESSABLE_ENTITY
                }
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            }
        };
        ApiError { status, code: e.code(), message: e.to_string(), position: e.position() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(p) = self.position {
            error["position"] = json!({ "line": p.line, "column": p.column });
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Parses a JSON body ourselves so malformed input gets the API's error shape.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("invalid JSON body: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobStatus {
    pub job_id: u64,
    pub state: JobState,
    pub done: usize,
    pub total: usize,
    pub output: String,
    pub stats: Option<GraphStats>,
    pub error: Option<String>,
}

pub struct AppState {
    paths: DataPaths,
    data_dir: PathBuf,
    engine: RwLock<Option<Arc<Engine>>>,
    jobs: Mutex<HashMap<u64, JobStatus>>,
    next_job: AtomicU64,
    build_lock: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(data_dir: impl Into<PathBuf>, paths: DataPaths, engine: Option<Engine>) -> Arc<Self> {
        Arc::new(AppState {
            paths,
            data_dir: data_dir.into(),
            engine: RwLock::new(engine.map(Arc::new)),
            jobs: Mutex::new(HashMap::new()),
            next_job: AtomicU64::new(1),
            build_lock: tokio::sync::Mutex::new(()),
        })
    }

    fn engine(&self) -> ApiResult<Arc<Engine>> {
        self.engine
            .read()
            .expect("engine lock poisoned")
            .clone()
            .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "NO_GRAPH", "no graph is loaded"))
    }

    fn update_job(&self, id: u64, f: impl FnOnce(&mut JobStatus)) {
        if let Some(job) = self.jobs.lock().expect("jobs lock poisoned").get_mut(&id) {
            f(job);
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/corpus", post(ingest))
        .route("/api/graph/build", post(start_build))
        .route("/api/graph/build/{job}", get(build_status))
        .route("/api/graph/stats", get(stats))
        .route("/api/communities", get(communities))
        .route("/api/query", post(query))
        .route("/api/case", post(case))
        .with_state(state)
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let loaded = state.engine.read().expect("engine lock poisoned").is_some();
    Json(json!({ "status": "ok", "graph_loaded": loaded }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestRequest {
    jsonl: String,
    #[serde(default)]
    strict: bool,
}

async fn ingest(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let req: IngestRequest = parse_body(&body)?;
    blocking(move || {
        let (corpus, report) = parse_corpus(req.jsonl.as_bytes(), req.strict).map_err(EngineError::from)?;
        let mut out = Vec::new();
        corpus.write_jsonl(&mut out).map_err(|e| EngineError::Io { path: state.paths.corpus.clone(), source: e })?;
        write_file(&state.paths.corpus, &out)?;
        Ok(Json(json!({
            "loaded": report.loaded,
            "rejected": report.rejected,
            "rejections": report.rejections,
            "path": state.paths.corpus.display().to_string(),
        })))
    })
    .await
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BuildRequest {
    granularity: Granularity,
    threshold: f64,
    edge_limit: u32,
    index: IndexMode,
    dim: usize,
    communities: bool,
    /// File name inside the data directory.
    output: Option<String>,
    /// Serve the new graph once it is built.
    activate: bool,
}

impl Default for BuildRequest {
    fn default() -> Self {
        let s = BuildSettings::default();
        BuildRequest {
            granularity: s.granularity,
            threshold: s.threshold,
            edge_limit: s.edge_limit,
            index: s.index,
            dim: s.dim,
            communities: s.communities,
            output: None,
            activate: false,
        }
    }
}

impl BuildRequest {
    fn settings(&self) -> BuildSettings {
        BuildSettings {
            granularity: self.granularity,
            threshold: self.threshold,
            edge_limit: self.edge_limit,
            index: self.index,
            dim: self.dim,
            communities: self.communities,
        }
    }
}

fn output_path(dir: &Path, name: &str) -> ApiResult<PathBuf> {
    let plain = !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if !plain {
        return Err(ApiError::invalid(format!("output must be a plain file name, got {name:?}")));
    }
    Ok(dir.join(name))
}

async fn start_build(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<JobStatus>)> {
    let req: BuildRequest = parse_body(&body)?;
    let s = req.settings();
    if !(s.threshold > 0.0 && s.threshold <= 1.0) || s.edge_limit == 0 || s.dim == 0 {
        return Err(ApiError::invalid("need 0 < threshold <= 1, edge_limit >= 1 and dim >= 1"));
    }
    let job_id = state.next_job.fetch_add(1, Ordering::Relaxed);
    let name = req.output.clone().unwrap_or_else(|| format!("graph-{job_id}.awkg"));
    let graph_path = output_path(&state.data_dir, &name)?;
    let status = JobStatus {
        job_id,
        state: JobState::Queued,
        done: 0,
        total: 0,
        output: graph_path.display().to_string(),
        stats: None,
        error: None,
    };
    state.jobs.lock().expect("jobs lock poisoned").insert(job_id, status.clone());

    let worker = state.clone();
    tokio::spawn(async move {
        let _exclusive = worker.build_lock.lock().await;
        worker.update_job(job_id, |j| j.state = JobState::Running);
        let w = worker.clone();
        let result = tokio::task::spawn_blocking(move || run_build(&w, job_id, &req, &graph_path)).await;
        let outcome = match result {
            Ok(r) => r,
            Err(e) => Err(e.to_string()),
        };
        worker.update_job(job_id, |j| match outcome {
            Ok(stats) => {
                j.state = JobState::Succeeded;
                j.stats = Some(stats);
            }
            Err(message) => {
                j.state = JobState::Failed;
                j.error = Some(message);
            }
        });
    });
    Ok((StatusCode::ACCEPTED, Json(status)))
}

fn run_build(state: &AppState, job_id: u64, req: &BuildRequest, graph_path: &Path) -> Result<GraphStats, String> {
    let run = || -> Result<GraphStats, EngineError> {
        let (corpus, _) = load_corpus(&state.paths.corpus, false)?;
        let (graph, vectors) = build_pipeline(&corpus, &req.settings(), None, |done, total| {
            state.update_job(job_id, |j| {
                j.done = done;
                j.total = total;
            })
        })?;
        write_file(graph_path, &graph_to_bytes(&graph))?;
        let vectors_path = graph_path.with_extension("awev");
        let file = VectorFile { dim: graph.config().dim as usize, records: vectors.clone() };
        let mut bytes = Vec::new();
        file.write_to(&mut bytes)?;
        write_file(&vectors_path, &bytes)?;
        let stats = graph_stats(&graph);
        if req.activate {
            let engine = Engine::new(corpus, graph, vectors)?;
            *state.engine.write().expect("engine lock poisoned") = Some(Arc::new(engine));
        }
        Ok(stats)
    };
    run().map_err(|e| e.to_string())
}

async fn build_status(State(state): State<Arc<AppState>>, UrlPath(job): UrlPath<String>) -> ApiResult<Json<JobStatus>> {
    let id: u64 = job.parse().map_err(|_| ApiError::invalid(format!("job id must be a number, got {job:?}")))?;
    state
        .jobs
        .lock()
        .expect("jobs lock poisoned")
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("no build job {id}")))
}

async fn stats(State(state): State<Arc<AppState>>) -> ApiResult<Json<serde_json::Value>> {
    let engine = state.engine()?;
    let s = engine.stats();
    Ok(Json(json!({
        "vertices": s.vertex_count,
        "edges": s.edge_count,
        "average_degree": s.average_degree,
        "config": engine.graph().config(),
    })))
}

#[derive(Deserialize)]
struct CommunityParams {
    top: Option<usize>,
}

async fn communities(
    State(state): State<Arc<AppState>>,
    Query(params): Query<CommunityParams>,
) -> ApiResult<Json<serde_json::Value>> {
    let engine = state.engine()?;
    let top = params.top.unwrap_or(DEFAULT_TOP_MEMBERS);
    blocking(move || Ok(Json(json!({ "communities": engine.communities(top) })))).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRequest {
    #[serde(default)]
    filter: String,
    #[serde(default)]
    limit: Option<usize>,
}

async fn query(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let req: QueryRequest = parse_body(&body)?;
    let engine = state.engine()?;
    blocking(move || {
        let results = engine.query(&req.filter, req.limit.unwrap_or(DEFAULT_QUERY_LIMIT))?;
        Ok(Json(json!({ "results": results })))
    })
    .await
}

async fn case(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let req: CaseRequest = parse_body(&body)?;
    req.validate()?;
    let engine = state.engine()?;
    blocking(move || Ok(Json(json!({ "cases": engine.cases(&req)? })))).await
}
