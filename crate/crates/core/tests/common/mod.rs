#![allow(dead_code)]

pub mod designed;
pub mod gen;
pub mod golden;
pub mod oracle;
pub mod scenarios;
pub mod spans;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use chrono::NaiveDate;
use wikitables_core::controller::{HookAction, JobConfig, JobHooks, JobPhase, JobState, Stage};
use wikitables_core::source::SourceConfig;
use wikitables_core::store::Checkpoint;

pub fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 9, 13).unwrap()
}

/// Source settings for a local mock: no politeness delays, quick retries.
pub fn mock_source(url: &str) -> SourceConfig {
    SourceConfig {
        min_request_interval: 0,
        backoff_base: 5,
        max_retries: 3,
        max_concurrent_requests: 8,
        page_url_base: Some("https://ru.wikipedia.org/wiki/".into()),
        ..SourceConfig::api(url)
    }
}

pub fn job(url: &str, root: &Path) -> JobConfig {
    JobConfig {
        worker_count: 4,
        ..JobConfig::new(date(), mock_source(url), root)
    }
}

pub fn finish(state: JobState) -> JobState {
    assert_eq!(state.phase, JobPhase::Finished, "{state:?}");
    state
}

/// Every file of a corpus, keyed by relative path, with run-dependent parts
/// removed: `extracted_at` in table sidecars, the toolkit version in the manifest,
/// and record order in the checkpoint log. Reports are left out.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for p in entries {
        let rel = p
            .strip_prefix(root)
            .unwrap()
            .to_string_lossy()
            .replace('\\', "/");
        if p.is_dir() {
            if rel != "reports" {
                walk(root, &p, out);
            }
            continue;
        }
        let bytes = fs::read(&p).unwrap();
        let bytes = if rel == "checkpoint.log" {
            let cp = Checkpoint::parse(&bytes, &p, None).unwrap();
            format!("{:?}", cp.records).into_bytes()
        } else if rel.ends_with(".json") {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            if let Some(o) = v.as_object_mut() {
                o.remove("extracted_at");
                o.remove("toolkit_version");
            }
            serde_json::to_vec(&v).unwrap()
        } else {
            bytes
        };
        out.insert(rel, bytes);
    }
}

/// Assert two corpora are identical under [`snapshot`], naming the first
/// difference.
pub fn assert_same_corpus(a: &Path, b: &Path) {
    let (sa, sb) = (snapshot(a), snapshot(b));
    let ka: Vec<_> = sa.keys().collect();
    let kb: Vec<_> = sb.keys().collect();
    assert_eq!(ka, kb, "file sets differ");
    for (k, v) in &sa {
        assert!(v == &sb[k], "{k} differs");
    }
}

/// Merge a chunk corpus into `dst` the manual way: copy the table folders, keep
/// one manifest and listing, and concatenate the checkpoint logs.
pub fn merge_by_copy(src: &Path, dst: &Path) {
    fs::create_dir_all(dst).unwrap();
    for f in ["manifest.json", "titles.tsv"] {
        if !dst.join(f).exists() {
            fs::copy(src.join(f), dst.join(f)).unwrap();
        }
    }
    let mut log = fs::read(dst.join("checkpoint.log")).unwrap_or_default();
    log.extend(fs::read(src.join("checkpoint.log")).unwrap());
    fs::write(dst.join("checkpoint.log"), log).unwrap();
    copy_dir(&src.join("tables"), &dst.join("tables"));
}

fn copy_dir(src: &Path, dst: &Path) {
    fs::create_dir_all(dst).unwrap();
    for e in fs::read_dir(src).unwrap() {
        let p = e.unwrap().path();
        let target = dst.join(p.file_name().unwrap());
        if p.is_dir() {
            copy_dir(&p, &target);
        } else {
            fs::copy(&p, &target).unwrap();
        }
    }
}

/// Files left with a temporary suffix, or CSVs without their sidecar.
pub fn torn_files(root: &Path) -> Vec<String> {
    snapshot(root)
        .keys()
        .filter(|k| {
            k.ends_with(".tmp")
                || (k.ends_with(".csv") && !snapshot_has(root, &k.replace(".csv", ".json")))
        })
        .cloned()
        .collect()
}

fn snapshot_has(root: &Path, rel: &str) -> bool {
    root.join(rel).exists()
}

/// Crash once at the n-th time `stage` matches.
pub struct CrashAt {
    pub matches: Box<dyn Fn(Stage) -> bool + Send + Sync>,
    pub action: HookAction,
    pub after: usize,
    seen: AtomicUsize,
    pub fired: Mutex<Option<u64>>,
}

impl CrashAt {
    pub fn new(
        matches: impl Fn(Stage) -> bool + Send + Sync + 'static,
        action: HookAction,
        after: usize,
    ) -> Self {
        CrashAt {
            matches: Box::new(matches),
            action,
            after,
            seen: AtomicUsize::new(0),
            fired: Mutex::new(None),
        }
    }
}

impl JobHooks for CrashAt {
    fn at(&self, page_id: u64, stage: Stage) -> HookAction {
        if !(self.matches)(stage) {
            return HookAction::Continue;
        }
        if self.seen.fetch_add(1, Ordering::SeqCst) == self.after {
            *self.fired.lock().unwrap() = Some(page_id);
            return self.action;
        }
        HookAction::Continue
    }
}

/// Records the largest in-flight page count seen.
#[derive(Default)]
pub struct PeakInFlight(pub AtomicUsize);

impl JobHooks for PeakInFlight {
    fn at(&self, _page_id: u64, _stage: Stage) -> HookAction {
        std::thread::sleep(Duration::from_micros(200));
        HookAction::Continue
    }

    fn in_flight(&self, pages: usize) {
        self.0.fetch_max(pages, Ordering::SeqCst);
    }
}
