#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};

use serde_json::Value;
use wikitables_core::store::Corpus;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wikitables"));
    c.env_remove("WIKITABLES_BIND")
        .env_remove("WIKITABLES_STATE_DIR")
        .env_remove("WIKITABLES_CORPUS");
    c
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Corpus contents with timestamps removed: every table's metadata and grid plus
/// the set of checkpoint records.
pub fn corpus_view(root: &Path) -> (BTreeMap<String, String>, BTreeSet<String>) {
    let c = Corpus::new(root);
    let mut tables = BTreeMap::new();
    for id in c.table_ids().unwrap() {
        let t = c.read_table(id).unwrap();
        let mut meta = serde_json::to_value(&t.meta).unwrap();
        meta.as_object_mut().unwrap().remove("extracted_at");
        tables.insert(
            id.to_string(),
            format!(
                "{meta}\n{}",
                String::from_utf8(std::fs::read(c.table_paths(id).csv).unwrap()).unwrap()
            ),
        );
    }
    let log = std::fs::read_to_string(root.join("checkpoint.log")).unwrap();
    let records = log.lines().skip(1).map(str::to_owned).collect();
    (tables, records)
}

/// A `wikitables serve` child process; killed on drop.
pub struct Server {
    pub child: Child,
    pub base: String,
}

impl Server {
    pub fn start(mut cmd: Command) -> Server {
        let mut child = cmd
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected first line {line:?}"))
            .to_owned();
        Server { child, base }
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        reply(ureq::get(&format!("{}{path}", self.base)).call())
    }

    pub fn get_text(&self, path: &str) -> (u16, String) {
        match ureq::get(&format!("{}{path}", self.base)).call() {
            Ok(r) => (r.status(), r.into_string().unwrap()),
            Err(ureq::Error::Status(code, r)) => (code, r.into_string().unwrap()),
            Err(e) => panic!("{e}"),
        }
    }

    pub fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        reply(
            ureq::post(&format!("{}{path}", self.base))
                .set("Content-Type", "application/json")
                .send_string(&body.to_string()),
        )
    }

    pub fn post_empty(&self, path: &str) -> (u16, Value) {
        reply(ureq::post(&format!("{}{path}", self.base)).call())
    }

    /// Poll a job until `pred` holds on its state, panicking after 30 s.
    pub fn wait_for(&self, id: &str, pred: impl Fn(&Value) -> bool) -> Value {
        let deadline = std::time::Instant::now() + std::time::Duration::from_secs(30);
        loop {
            let (code, st) = self.get(&format!("/jobs/{id}/progress"));
            assert_eq!(code, 200);
            if pred(&st) {
                return st;
            }
            assert!(
                std::time::Instant::now() < deadline,
                "timed out, last state {st}"
            );
            std::thread::sleep(std::time::Duration::from_millis(50));
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn reply(r: Result<ureq::Response, ureq::Error>) -> (u16, Value) {
    match r {
        Ok(r) => (
            r.status(),
            serde_json::from_str(&r.into_string().unwrap()).unwrap(),
        ),
        Err(ureq::Error::Status(code, r)) => (
            code,
            serde_json::from_str(&r.into_string().unwrap()).unwrap(),
        ),
        Err(e) => panic!("{e}"),
    }
}
