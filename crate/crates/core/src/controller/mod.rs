//! Crawl jobs: list, chunk, then fetch → extract → filter → store → checkpoint.
//!
//! A job works on one chunk of the persisted title listing. Workers pull pages from
//! a shared queue, so at most `worker_count` pages are ever between fetch and
//! checkpoint. Every page either ends with a durable checkpoint record or leaves
//! nothing the next run would trust: files of pages without a record are purged
//! before the page is processed again.

mod progress;

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Duration;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::extract::{ExtractOptions, Extractor};
use crate::filter::{apply_filters, FilterConfig};
use crate::source::{open_source, FetchOutcome, PageRef, PageSource, SourceConfig, SourceError};
use crate::store::{
    Checkpoint, CheckpointLog, CheckpointRecord, Corpus, Manifest, PageStatus, TableMetadata,
};
use crate::{Error, Result};

pub use progress::{Clock, ManualClock, PageTimer, SystemClock, EMA_ALPHA};

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub snapshot_date: NaiveDate,
    pub source: SourceConfig,
    #[serde(default)]
    pub filters: FilterConfig,
    #[serde(default)]
    pub extract: ExtractOptions,
    #[serde(default = "one")]
    pub chunk_count: usize,
    #[serde(default)]
    pub chunk_index: usize,
    pub corpus_root: PathBuf,
    #[serde(default = "one")]
    pub worker_count: usize,
}

impl JobConfig {
    pub fn new(
        snapshot_date: NaiveDate,
        source: SourceConfig,
        corpus_root: impl Into<PathBuf>,
    ) -> Self {
        JobConfig {
            snapshot_date,
            source,
            filters: FilterConfig::default(),
            extract: ExtractOptions::default(),
            chunk_count: 1,
            chunk_index: 0,
            corpus_root: corpus_root.into(),
            worker_count: 1,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = self.source.problems();
        out.extend(self.filters.problems());
        if self.chunk_count == 0 {
            out.push("chunk_count must be at least 1".into());
        } else if self.chunk_index >= self.chunk_count {
            out.push(format!(
                "chunk_index {} must be below chunk_count {}",
                self.chunk_index, self.chunk_count
            ));
        }
        if self.worker_count == 0 {
            out.push("worker_count must be at least 1".into());
        }
        if self.corpus_root.as_os_str().is_empty() {
            out.push("corpus_root is required".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(p))
        }
    }

    pub fn manifest(&self) -> Manifest {
        Manifest::new(
            self.snapshot_date,
            self.filters.clone(),
            self.extract.clone(),
        )
    }
}

/// Slice `chunk_index` of `titles` cut into `chunk_count` contiguous parts whose
/// sizes differ by at most one (larger parts first).
pub fn plan_chunks(
    titles: &[PageRef],
    chunk_count: usize,
    chunk_index: usize,
) -> Result<&[PageRef]> {
    if chunk_count == 0 || chunk_index >= chunk_count {
        return Err(Error::Config(format!(
            "chunk {chunk_index} of {chunk_count} does not exist"
        )));
    }
    let (base, rem) = (titles.len() / chunk_count, titles.len() % chunk_count);
    let start = chunk_index * base + chunk_index.min(rem);
    let len = base + usize::from(chunk_index < rem);
    Ok(&titles[start..start + len])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobPhase {
    Listing,
    Crawling,
    Paused,
    Finished,
    Failed,
}

impl JobPhase {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobPhase::Finished | JobPhase::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobState {
    pub phase: JobPhase,
    /// Pages in this job's chunk; unknown until the listing is in place.
    pub pages_total: Option<u64>,
    pub pages_done: u64,
    pub pages_left: Option<u64>,
    pub avg_page_seconds: f64,
    pub eta_seconds: Option<f64>,
    pub pages_missing: u64,
    pub pages_unparsed: u64,
    pub tables_written: u64,
    pub started_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub error: Option<String>,
}

impl JobState {
    fn new() -> Self {
        let now = Utc::now();
        JobState {
            phase: JobPhase::Listing,
            pages_total: None,
            pages_done: 0,
            pages_left: None,
            avg_page_seconds: 0.0,
            eta_seconds: None,
            pages_missing: 0,
            pages_unparsed: 0,
            tables_written: 0,
            started_at: now,
            updated_at: now,
            error: None,
        }
    }

    /// Fill in the derived `pages_left` and `eta_seconds` fields.
    pub fn with_estimates(mut self, timer: &PageTimer) -> Self {
        self.avg_page_seconds = timer.average().unwrap_or(0.0);
        self.pages_left = self.pages_total.map(|t| t.saturating_sub(self.pages_done));
        self.eta_seconds = match (self.phase, self.pages_left, timer.average()) {
            (JobPhase::Finished, _, _) => Some(0.0),
            (_, Some(0), _) => Some(0.0),
            (_, Some(left), Some(avg)) => Some(left as f64 * avg),
            _ => None,
        };
        self
    }
}

/// Points in the per-page pipeline where tests can interrupt a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Page HTML received, nothing written yet.
    Fetched,
    /// Both files of a table exist under temporary names.
    TableStaged(u32),
    /// The table's CSV has been renamed into place, its JSON not yet.
    CsvCommitted(u32),
    TableCommitted(u32),
    /// All tables of the page written, checkpoint record not yet appended.
    BeforeCheckpoint,
    /// Appending the checkpoint record.
    Checkpointing,
    Checkpointed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookAction {
    Continue,
    /// Stop the whole job on the spot, as if the process died.
    Crash,
    /// Only meaningful at [`Stage::Checkpointing`]: write this many bytes of the
    /// record, then crash.
    CrashTorn(usize),
}

/// Instrumentation and fault injection.
pub trait JobHooks: Send + Sync {
    fn at(&self, _page_id: u64, _stage: Stage) -> HookAction {
        HookAction::Continue
    }

    /// Called whenever a page enters the pipeline, with the new in-flight count.
    fn in_flight(&self, _pages: usize) {}
}

struct NoHooks;

impl JobHooks for NoHooks {}

/// Optional collaborators of a job; defaults are the real ones.
#[derive(Default, Clone)]
pub struct JobOptions {
    pub source: Option<Arc<dyn PageSource>>,
    pub hooks: Option<Arc<dyn JobHooks>>,
    pub clock: Option<Arc<dyn Clock>>,
}

struct Control {
    state: JobState,
    timer: PageTimer,
    pause_requested: bool,
    in_flight: usize,
    running: bool,
}

struct Shared {
    cfg: JobConfig,
    control: Mutex<Control>,
    changed: Condvar,
    abort: AtomicBool,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Control> {
        self.control.lock().unwrap()
    }

    fn update(&self, f: impl FnOnce(&mut Control)) {
        let mut c = self.lock();
        f(&mut c);
        c.state.updated_at = Utc::now();
        drop(c);
        self.changed.notify_all();
    }
}

/// Handle to a running (or finished) job. Cloning shares the job.
#[derive(Clone)]
pub struct JobHandle {
    shared: Arc<Shared>,
    thread: Arc<Mutex<Option<JoinHandle<()>>>>,
}

impl JobHandle {
    pub fn config(&self) -> &JobConfig {
        &self.shared.cfg
    }

    pub fn progress(&self) -> JobState {
        let c = self.shared.lock();
        c.state.clone().with_estimates(&c.timer)
    }

    /// Stop handing out new pages. In-flight pages finish and the phase becomes
    /// `paused` once they have. A no-op on finished or failed jobs.
    pub fn pause(&self) -> JobState {
        self.shared.update(|c| {
            if c.state.phase.is_terminal() {
                return;
            }
            c.pause_requested = true;
            if c.in_flight == 0 && c.state.phase == JobPhase::Crawling {
                c.state.phase = JobPhase::Paused;
            }
        });
        self.progress()
    }

    pub fn resume(&self) -> JobState {
        self.shared.update(|c| {
            if c.state.phase.is_terminal() {
                return;
            }
            c.pause_requested = false;
            if c.state.phase == JobPhase::Paused {
                c.state.phase = JobPhase::Crawling;
            }
        });
        self.progress()
    }

    pub fn is_running(&self) -> bool {
        self.shared.lock().running
    }

    /// Block until the job thread exits.
    pub fn wait(&self) -> JobState {
        if let Some(t) = self.thread.lock().unwrap().take() {
            let _ = t.join();
        }
        self.progress()
    }

    /// Block until the job is paused, has ended, or `timeout` passes.
    pub fn wait_settled(&self, timeout: Duration) -> JobState {
        let deadline = std::time::Instant::now() + timeout;
        let mut c = self.shared.lock();
        while c.running && c.state.phase != JobPhase::Paused {
            let now = std::time::Instant::now();
            if now >= deadline {
                break;
            }
            c = self
                .shared
                .changed
                .wait_timeout(c, deadline - now)
                .unwrap()
                .0;
        }
        drop(c);
        self.progress()
    }
}

/// Start a job with the default source, hooks and clock.
pub fn run_job(cfg: JobConfig) -> Result<JobHandle> {
    run_job_with(cfg, JobOptions::default())
}

/// Start a job in a background thread.
///
/// Configuration, manifest and checkpoint compatibility are checked before
/// returning; a mismatch is reported without touching the corpus.
pub fn run_job_with(cfg: JobConfig, opts: JobOptions) -> Result<JobHandle> {
    cfg.validate()?;
    let extractor = Extractor::new(&cfg.extract)?;
    let corpus = Corpus::new(&cfg.corpus_root);
    let manifest = cfg.manifest();
    if corpus.has_manifest() {
        if let Some(reason) = corpus.read_manifest()?.mismatch(&manifest) {
            return Err(Error::CorpusMismatch {
                root: cfg.corpus_root.clone(),
                reason,
            });
        }
    }
    corpus.load_checkpoint(Some(cfg.snapshot_date))?;
    let source = match opts.source {
        Some(s) => s,
        None => open_source(&cfg.source)?,
    };
    corpus.init(&manifest)?;
    let (log, checkpoint) = CheckpointLog::open(&corpus.checkpoint_path(), cfg.snapshot_date)?;

    let shared = Arc::new(Shared {
        cfg: cfg.clone(),
        control: Mutex::new(Control {
            state: JobState::new(),
            timer: PageTimer::default(),
            pause_requested: false,
            in_flight: 0,
            running: true,
        }),
        changed: Condvar::new(),
        abort: AtomicBool::new(false),
    });
    let job = Job {
        shared: shared.clone(),
        corpus,
        source,
        extractor,
        hooks: opts.hooks.unwrap_or_else(|| Arc::new(NoHooks)),
        clock: opts
            .clock
            .unwrap_or_else(|| Arc::new(SystemClock::default())),
        log: Mutex::new(log),
        queue: Mutex::new(VecDeque::new()),
    };
    let thread = std::thread::Builder::new()
        .name("crawl-job".into())
        .spawn(move || job.run(checkpoint))
        .map_err(|e| Error::io("spawning job thread", e))?;
    Ok(JobHandle {
        shared,
        thread: Arc::new(Mutex::new(Some(thread))),
    })
}

struct Job {
    shared: Arc<Shared>,
    corpus: Corpus,
    source: Arc<dyn PageSource>,
    extractor: Extractor,
    hooks: Arc<dyn JobHooks>,
    clock: Arc<dyn Clock>,
    log: Mutex<CheckpointLog>,
    queue: Mutex<VecDeque<PageRef>>,
}

enum PageError {
    /// Another worker crashed or an injected crash fired here.
    Aborted,
    Fatal(Error),
}

impl From<Error> for PageError {
    fn from(e: Error) -> Self {
        PageError::Fatal(e)
    }
}

impl Job {
    fn run(self, checkpoint: Checkpoint) {
        let outcome = self.crawl(checkpoint);
        let aborted = self.shared.abort.load(Ordering::SeqCst);
        self.shared.update(|c| {
            c.running = false;
            match outcome {
                Err(e) => {
                    log::error!("job failed: {e}");
                    c.state.phase = JobPhase::Failed;
                    c.state.error = Some(e.to_string());
                }
                Ok(()) if aborted => {
                    c.state.phase = JobPhase::Failed;
                    c.state.error.get_or_insert_with(|| "job aborted".into());
                }
                Ok(()) => {
                    let done = c.state.pages_total == Some(c.state.pages_done);
                    c.state.phase = if done {
                        JobPhase::Finished
                    } else {
                        JobPhase::Paused
                    };
                }
            }
        });
    }

    fn titles(&self) -> Result<Vec<PageRef>> {
        if let Some(t) = self.corpus.read_titles()? {
            return Ok(t);
        }
        let mut titles = Vec::new();
        for item in self.source.titles() {
            titles.push(item?);
        }
        titles.sort_by_key(|p| p.page_id);
        titles.dedup_by_key(|p| p.page_id);
        self.corpus.write_titles(&titles)?;
        log::info!("listed {} pages", titles.len());
        Ok(titles)
    }

    fn crawl(&self, checkpoint: Checkpoint) -> Result<()> {
        let cfg = &self.shared.cfg;
        let titles = self.titles()?;
        let chunk = plan_chunks(&titles, cfg.chunk_count, cfg.chunk_index)?;
        let pending: VecDeque<PageRef> = chunk
            .iter()
            .filter(|p| !checkpoint.contains(p.page_id))
            .cloned()
            .collect();
        let done = (chunk.len() - pending.len()) as u64;
        self.shared.update(|c| {
            c.state.pages_total = Some(chunk.len() as u64);
            c.state.pages_done = done;
            c.state.phase = if c.pause_requested {
                JobPhase::Paused
            } else {
                JobPhase::Crawling
            };
        });
        *self.queue.lock().unwrap() = pending;

        let first_error: Mutex<Option<Error>> = Mutex::new(None);
        std::thread::scope(|s| {
            for _ in 0..cfg.worker_count {
                s.spawn(|| {
                    if let Err(e) = self.worker() {
                        self.shared.abort.store(true, Ordering::SeqCst);
                        first_error.lock().unwrap().get_or_insert(e);
                        self.shared.changed.notify_all();
                    }
                });
            }
        });
        match first_error.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Take the next page unless paused or aborted.
    fn next_page(&self) -> Option<PageRef> {
        let mut c = self.shared.lock();
        loop {
            if self.shared.abort.load(Ordering::SeqCst) {
                return None;
            }
            if !c.pause_requested {
                break;
            }
            if c.in_flight == 0 && c.state.phase == JobPhase::Crawling {
                c.state.phase = JobPhase::Paused;
                c.state.updated_at = Utc::now();
                self.shared.changed.notify_all();
            }
            c = self.shared.changed.wait(c).unwrap();
        }
        let page = self.queue.lock().unwrap().pop_front()?;
        c.in_flight += 1;
        let n = c.in_flight;
        drop(c);
        self.hooks.in_flight(n);
        Some(page)
    }

    fn worker(&self) -> Result<()> {
        while let Some(page) = self.next_page() {
            let started = self.clock.now();
            let result = self.process(&page);
            let elapsed = self.clock.now().saturating_sub(started);
            self.shared.update(|c| {
                c.in_flight -= 1;
                if let Ok((status, tables)) = &result {
                    c.state.pages_done += 1;
                    c.state.tables_written += u64::from(*tables);
                    match status {
                        PageStatus::Missing => c.state.pages_missing += 1,
                        PageStatus::ParseError => c.state.pages_unparsed += 1,
                        PageStatus::Done => {}
                    }
                    c.timer.record(elapsed.as_secs_f64());
                }
                if c.pause_requested && c.in_flight == 0 && c.state.phase == JobPhase::Crawling {
                    c.state.phase = JobPhase::Paused;
                }
            });
            match result {
                Ok(_) => {}
                Err(PageError::Aborted) => return Ok(()),
                Err(PageError::Fatal(e)) => return Err(e),
            }
        }
        Ok(())
    }

    fn hook(&self, page_id: u64, stage: Stage) -> std::result::Result<HookAction, PageError> {
        if self.shared.abort.load(Ordering::SeqCst) {
            return Err(PageError::Aborted);
        }
        let action = self.hooks.at(page_id, stage);
        if action == HookAction::Crash {
            self.crash(page_id, stage);
            return Err(PageError::Aborted);
        }
        Ok(action)
    }

    fn crash(&self, page_id: u64, stage: Stage) {
        self.shared.abort.store(true, Ordering::SeqCst);
        self.shared.update(|c| {
            c.state.error = Some(format!("injected crash at {stage:?} of page {page_id}"));
        });
    }

    fn process(&self, page: &PageRef) -> std::result::Result<(PageStatus, u32), PageError> {
        let id = page.page_id;
        self.corpus.purge_page(id)?;
        let (status, written) = match self.source.fetch(page) {
            Err(e @ SourceError::Network { .. }) => return Err(PageError::Fatal(e.into())),
            Err(e) => {
                log::warn!("page {id} ({}): {e}", page.title);
                (PageStatus::ParseError, 0)
            }
            Ok(FetchOutcome::Missing) => {
                log::info!("page {id} ({}) is gone", page.title);
                (PageStatus::Missing, 0)
            }
            Ok(FetchOutcome::Page(raw)) => {
                self.hook(id, Stage::Fetched)?;
                match self.extractor.extract(&raw) {
                    Err(e) => {
                        log::warn!("page {id} ({}): {e}", page.title);
                        (PageStatus::ParseError, 0)
                    }
                    Ok(ex) => {
                        for w in &ex.warnings {
                            log::debug!("table {}: {}", w.table_id, w.message);
                        }
                        (PageStatus::Done, self.store_tables(id, ex.tables)?)
                    }
                }
            }
        };
        self.hook(id, Stage::BeforeCheckpoint)?;
        let rec = CheckpointRecord {
            page_id: id,
            table_count: written,
            status,
        };
        {
            let mut log = self.log.lock().unwrap();
            match self.hook(id, Stage::Checkpointing)? {
                HookAction::CrashTorn(keep) => {
                    log.append_torn(rec, keep)?;
                    self.crash(id, Stage::Checkpointing);
                    return Err(PageError::Aborted);
                }
                _ => log.append(rec)?,
            }
        }
        self.hook(id, Stage::Checkpointed)?;
        Ok((status, written))
    }

    fn store_tables(
        &self,
        page_id: u64,
        tables: Vec<crate::extract::ExtractedTable>,
    ) -> std::result::Result<u32, PageError> {
        let cfg = &self.shared.cfg;
        let mut written = 0;
        for t in tables {
            let t = if cfg.filters.is_identity() {
                t
            } else {
                match apply_filters(&t, &cfg.filters) {
                    Some(t) => t,
                    None => continue,
                }
            };
            let offset = t.table_id.offset;
            let meta = TableMetadata::new(&t, cfg.snapshot_date, Utc::now());
            let staged = self.corpus.stage_table(&t, &meta)?;
            self.hook(page_id, Stage::TableStaged(offset))?;
            if let Err(e) = self.hook(page_id, Stage::CsvCommitted(offset)) {
                if self.shared.abort.load(Ordering::SeqCst) {
                    staged.commit_csv_only()?;
                }
                return Err(e);
            }
            staged.commit()?;
            self.hook(page_id, Stage::TableCommitted(offset))?;
            written += 1;
        }
        Ok(written)
    }
}
