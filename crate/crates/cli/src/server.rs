//! HTTP service: job control over the crawl controller plus read-only corpus access.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, RawQuery, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use wikitables_core::controller::{run_job, JobConfig, JobHandle, JobPhase, JobState};
use wikitables_core::extract::TableId;
use wikitables_core::stats::{compute_stats, search, CorpusStats, QuerySpec, SearchPage};
use wikitables_core::store::{Corpus, TableMetadata};
use wikitables_core::Error;

use crate::commands::CliError;

const JOBS_DIR: &str = "jobs";
const PERSIST_EVERY: Duration = Duration::from_millis(500);

/// A job as the API reports it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiJobResource {
    pub job_id: String,
    pub config: JobConfig,
    pub state: JobState,
}

/// Table payload: metadata plus the cell texts, header rows first.
#[derive(Debug, Serialize)]
pub struct TablePayload {
    pub metadata: TableMetadata,
    pub grid: Vec<Vec<String>>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::Validation(_) | Error::Config(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
            Error::CorpusMismatch { .. } => (StatusCode::CONFLICT, "corpus_mismatch"),
            Error::CheckpointCorrupt { .. } => (StatusCode::CONFLICT, "checkpoint_corrupt"),
            Error::MissingManifest(_) => (StatusCode::NOT_FOUND, "no_corpus"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct Entry {
    config: JobConfig,
    handle: Option<JobHandle>,
    /// Last state seen or restored; used while no handle is attached.
    last: JobState,
    persisted: Option<JobState>,
}

impl Entry {
    fn state(&self) -> JobState {
        match &self.handle {
            Some(h) => h.progress(),
            None => self.last.clone(),
        }
    }
}

#[derive(Default)]
struct Registry {
    next: u64,
    jobs: BTreeMap<u64, Entry>,
}

pub struct App {
    state_dir: PathBuf,
    default_corpus: Option<PathBuf>,
    registry: Mutex<Registry>,
}

fn job_id(n: u64) -> String {
    format!("job-{n}")
}

fn parse_job_id(id: &str) -> Option<u64> {
    id.strip_prefix("job-")?.parse().ok()
}

/// Absolute, lexically normalized path used to compare corpus roots.
fn root_key(p: &Path) -> PathBuf {
    let abs = std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    abs.canonicalize().unwrap_or(abs)
}

impl App {
    /// Open `state_dir`, restoring persisted jobs. Jobs that were active when
    /// the previous service stopped come back as paused.
    pub fn open(state_dir: &Path, default_corpus: Option<&Path>) -> Result<Self, String> {
        let jobs_dir = state_dir.join(JOBS_DIR);
        std::fs::create_dir_all(&jobs_dir)
            .map_err(|e| format!("cannot create {}: {e}", jobs_dir.display()))?;
        let mut reg = Registry {
            next: 1,
            ..Default::default()
        };
        let entries = std::fs::read_dir(&jobs_dir)
            .map_err(|e| format!("cannot read {}: {e}", jobs_dir.display()))?;
        for entry in entries {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let bad =
                |why: String| format!("state directory is corrupted: {}: {why}", path.display());
            let bytes = std::fs::read(&path).map_err(|e| bad(e.to_string()))?;
            let mut res: ApiJobResource =
                serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
            let n = parse_job_id(&res.job_id)
                .ok_or_else(|| bad(format!("bad job id {:?}", res.job_id)))?;
            if path.file_stem().and_then(|s| s.to_str()) != Some(res.job_id.as_str()) {
                return Err(bad("file name does not match job id".into()));
            }
            if !res.state.phase.is_terminal() {
                res.state.phase = JobPhase::Paused;
            }
            reg.next = reg.next.max(n + 1);
            reg.jobs.insert(
                n,
                Entry {
                    config: res.config,
                    handle: None,
                    last: res.state,
                    persisted: None,
                },
            );
        }
        Ok(App {
            state_dir: state_dir.to_path_buf(),
            default_corpus: default_corpus.map(Path::to_path_buf),
            registry: Mutex::new(reg),
        })
    }

    fn resource(n: u64, e: &Entry) -> ApiJobResource {
        ApiJobResource {
            job_id: job_id(n),
            config: e.config.clone(),
            state: e.state(),
        }
    }

    fn write_resource(&self, res: &ApiJobResource) -> std::io::Result<()> {
        let dir = self.state_dir.join(JOBS_DIR);
        let tmp = dir.join(format!(".{}.json.tmp", res.job_id));
        std::fs::write(
            &tmp,
            serde_json::to_vec_pretty(res).map_err(std::io::Error::other)?,
        )?;
        std::fs::rename(&tmp, dir.join(format!("{}.json", res.job_id)))
    }

    /// Write every job whose state changed since it was last written.
    pub fn persist(&self) {
        let mut reg = self.registry.lock().unwrap();
        for (&n, e) in reg.jobs.iter_mut() {
            let state = e.state();
            if e.persisted.as_ref() == Some(&state) {
                continue;
            }
            let res = ApiJobResource {
                job_id: job_id(n),
                config: e.config.clone(),
                state: state.clone(),
            };
            match self.write_resource(&res) {
                Ok(()) => e.persisted = Some(state),
                Err(err) => log::warn!("cannot persist {}: {err}", res.job_id),
            }
        }
    }

    /// At most one unfinished job per corpus root.
    fn check_free(reg: &Registry, cfg: &JobConfig, except: Option<u64>) -> ApiResult<()> {
        let key = root_key(&cfg.corpus_root);
        let busy = reg.jobs.iter().find(|(n, e)| {
            Some(**n) != except
                && root_key(&e.config.corpus_root) == key
                && !e.state().phase.is_terminal()
        });
        match busy {
            Some((n, _)) => Err(ApiError::new(
                StatusCode::CONFLICT,
                "corpus_busy",
                format!(
                    "{} already has an active job {}",
                    cfg.corpus_root.display(),
                    job_id(*n)
                ),
            )),
            None => Ok(()),
        }
    }

    pub fn create_job(&self, cfg: JobConfig) -> ApiResult<ApiJobResource> {
        let mut reg = self.registry.lock().unwrap();
        Self::check_free(&reg, &cfg, None)?;
        let handle = run_job(cfg.clone())?;
        let n = reg.next;
        reg.next += 1;
        let last = handle.progress();
        let entry = Entry {
            config: cfg,
            handle: Some(handle),
            last,
            persisted: None,
        };
        let res = Self::resource(n, &entry);
        reg.jobs.insert(n, entry);
        drop(reg);
        self.persist();
        Ok(res)
    }

    pub fn list_jobs(&self) -> Vec<ApiJobResource> {
        let reg = self.registry.lock().unwrap();
        reg.jobs
            .iter()
            .map(|(&n, e)| Self::resource(n, e))
            .collect()
    }

    fn with_job<T>(
        &self,
        id: &str,
        f: impl FnOnce(u64, &mut Entry) -> ApiResult<T>,
    ) -> ApiResult<T> {
        let n = parse_job_id(id).ok_or_else(|| ApiError::not_found(format!("no job {id}")))?;
        let mut reg = self.registry.lock().unwrap();
        let e = reg
            .jobs
            .get_mut(&n)
            .ok_or_else(|| ApiError::not_found(format!("no job {id}")))?;
        f(n, e)
    }

    pub fn job(&self, id: &str) -> ApiResult<ApiJobResource> {
        self.with_job(id, |n, e| Ok(Self::resource(n, e)))
    }

    pub fn pause(&self, id: &str) -> ApiResult<ApiJobResource> {
        let res = self.with_job(id, |n, e| {
            if let Some(h) = &e.handle {
                h.pause();
            }
            Ok(Self::resource(n, e))
        })?;
        self.persist();
        Ok(res)
    }

    /// Resume a paused job. A job restored from disk, or one that failed, is
    /// started again from its checkpoint. Finished jobs are left alone.
    pub fn resume(&self, id: &str) -> ApiResult<ApiJobResource> {
        let n = parse_job_id(id).ok_or_else(|| ApiError::not_found(format!("no job {id}")))?;
        let mut reg = self.registry.lock().unwrap();
        let e = reg
            .jobs
            .get(&n)
            .ok_or_else(|| ApiError::not_found(format!("no job {id}")))?;
        if let Some(h) = e.handle.as_ref().filter(|h| h.is_running()) {
            h.resume();
        } else if e.state().phase != JobPhase::Finished {
            Self::check_free(&reg, &e.config, Some(n))?;
            let e = reg.jobs.get_mut(&n).unwrap();
            let handle = run_job(e.config.clone())?;
            e.last = handle.progress();
            e.handle = Some(handle);
        }
        let res = Self::resource(n, &reg.jobs[&n]);
        drop(reg);
        self.persist();
        Ok(res)
    }

    fn corpus_for(&self, job: Option<&str>) -> ApiResult<PathBuf> {
        match job {
            Some(id) => self.with_job(id, |_, e| Ok(e.config.corpus_root.clone())),
            None => self.default_corpus.clone().ok_or_else(|| {
                ApiError::new(
                    StatusCode::NOT_FOUND,
                    "no_corpus",
                    "pass job=<id> or start the service with --corpus",
                )
            }),
        }
    }
}

fn split_query(raw: Option<&str>) -> (Option<String>, String) {
    let mut job = None;
    let mut rest = Vec::new();
    for (k, v) in
        serde_urlencoded::from_str::<Vec<(String, String)>>(raw.unwrap_or("")).unwrap_or_default()
    {
        if k == "job" {
            job = Some(v);
        } else {
            rest.push((k, v));
        }
    }
    (job, serde_urlencoded::to_string(rest).unwrap_or_default())
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "version": wikitables_core::TOOLKIT_VERSION }))
}

async fn create_job(
    State(app): State<Arc<App>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<ApiJobResource>)> {
    let cfg: JobConfig = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_request",
            format!("job config: {e}"),
        )
    })?;
    let res = blocking(move || app.create_job(cfg)).await?;
    Ok((StatusCode::CREATED, Json(res)))
}

async fn list_jobs(State(app): State<Arc<App>>) -> Json<Vec<ApiJobResource>> {
    Json(app.list_jobs())
}

async fn get_job(
    State(app): State<Arc<App>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<ApiJobResource>> {
    app.job(&id).map(Json)
}

async fn progress(
    State(app): State<Arc<App>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<JobState>> {
    app.job(&id).map(|r| Json(r.state))
}

async fn pause(
    State(app): State<Arc<App>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<ApiJobResource>> {
    blocking(move || app.pause(&id)).await.map(Json)
}

async fn resume(
    State(app): State<Arc<App>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<ApiJobResource>> {
    blocking(move || app.resume(&id)).await.map(Json)
}

async fn stats(State(app): State<Arc<App>>, RawQuery(q): RawQuery) -> ApiResult<Json<CorpusStats>> {
    let (job, _) = split_query(q.as_deref());
    let root = app.corpus_for(job.as_deref())?;
    blocking(move || Ok(compute_stats(&root, None)?))
        .await
        .map(Json)
}

async fn search_tables(
    State(app): State<Arc<App>>,
    RawQuery(q): RawQuery,
) -> ApiResult<Json<SearchPage>> {
    let (job, rest) = split_query(q.as_deref());
    let spec: QuerySpec = serde_urlencoded::from_str(&rest).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_request",
            format!("query: {e}"),
        )
    })?;
    let root = app.corpus_for(job.as_deref())?;
    blocking(move || Ok(search(&root, &spec)?)).await.map(Json)
}

fn table_id(page_id: &str, offset: &str) -> ApiResult<TableId> {
    match (page_id.parse(), offset.parse()) {
        (Ok(p), Ok(o)) => Ok(TableId::new(p, o)),
        _ => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_request",
            format!("bad table id {page_id}/{offset}"),
        )),
    }
}

async fn table(
    State(app): State<Arc<App>>,
    UrlPath((page_id, offset)): UrlPath<(String, String)>,
    RawQuery(q): RawQuery,
) -> ApiResult<Json<TablePayload>> {
    let id = table_id(&page_id, &offset)?;
    let root = app.corpus_for(split_query(q.as_deref()).0.as_deref())?;
    blocking(move || {
        let corpus = Corpus::new(&root);
        if !corpus.table_paths(id).json.exists() {
            return Err(ApiError::not_found(format!("no table {id}")));
        }
        let t = corpus.read_table(id)?;
        Ok(TablePayload {
            grid: t.grid.to_texts(),
            metadata: t.meta,
        })
    })
    .await
    .map(Json)
}

async fn table_csv(
    State(app): State<Arc<App>>,
    UrlPath((page_id, offset)): UrlPath<(String, String)>,
    RawQuery(q): RawQuery,
) -> ApiResult<Response> {
    let id = table_id(&page_id, &offset)?;
    let root = app.corpus_for(split_query(q.as_deref()).0.as_deref())?;
    let path = Corpus::new(&root).table_paths(id).csv;
    let bytes = blocking(move || match std::fs::read(&path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(ApiError::not_found(format!("no table {id}")))
        }
        Err(e) => Err(ApiError::internal(e.to_string())),
    })
    .await?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{id}.csv\""),
            ),
        ],
        bytes,
    )
        .into_response())
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/jobs", post(create_job).get(list_jobs))
        .route("/jobs/:id", get(get_job))
        .route("/jobs/:id/pause", post(pause))
        .route("/jobs/:id/resume", post(resume))
        .route("/jobs/:id/progress", get(progress))
        .route("/corpus/stats", get(stats))
        .route("/corpus/search", get(search_tables))
        .route("/corpus/tables/:page_id/:offset", get(table))
        .route("/corpus/tables/:page_id/:offset/csv", get(table_csv))
        .fallback(fallback)
        .layer(tower_http::cors::CorsLayer::permissive())
        .with_state(app)
}

/// Run the service until interrupted. Prints `listening on http://ADDR` once bound.
pub async fn serve(
    bind: SocketAddr,
    state_dir: &Path,
    corpus: Option<&Path>,
) -> Result<(), CliError> {
    let app = Arc::new(App::open(state_dir, corpus).map_err(CliError::Operation)?);
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| CliError::Operation(format!("cannot bind {bind}: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| CliError::Operation(e.to_string()))?;
    println!("listening on http://{addr}");
    use std::io::Write;
    let _ = std::io::stdout().flush();

    let saver = app.clone();
    let persist_loop = tokio::spawn(async move {
        loop {
            tokio::time::sleep(PERSIST_EVERY).await;
            let s = saver.clone();
            let _ = tokio::task::spawn_blocking(move || s.persist()).await;
        }
    });
    let result = axum::serve(listener, router(app.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Operation(e.to_string()));
    persist_loop.abort();
    app.persist();
    result
}

pub fn serve_blocking(
    bind: SocketAddr,
    state_dir: &Path,
    corpus: Option<&Path>,
) -> Result<(), CliError> {
    tokio::runtime::Runtime::new()
        .map_err(|e| CliError::Operation(e.to_string()))?
        .block_on(serve(bind, state_dir, corpus))
}
