//! A tiny stand-in for a MediaWiki Action API endpoint.
//!
//! It answers `list=allpages` (title order, `apcontinue` paging, redirects
//! filtered) and `action=parse` by page id, and can inject failures and latency.
//! Tests use it to exercise the crawler without network access; the CLI exposes
//! it as `wikitables mock-wiki` for demos.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use percent_encoding::percent_decode_str;
use serde_json::json;

use crate::error::IoContext;
use crate::source::MANIFEST_FILE;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockPage {
    pub page_id: u64,
    pub title: String,
    pub html: String,
    pub redirect: bool,
}

impl MockPage {
    pub fn new(page_id: u64, title: &str, html: &str) -> Self {
        MockPage {
            page_id,
            title: title.to_owned(),
            html: html.to_owned(),
            redirect: false,
        }
    }
}

#[derive(Default)]
struct Faults {
    /// listing batch number (1-based) → failures left
    listing: HashMap<u64, u32>,
    /// page id → failures left
    parse: HashMap<u64, u32>,
    parse_always_fails: bool,
}

#[derive(Default)]
struct State {
    pages: RwLock<BTreeMap<u64, MockPage>>,
    deleted: RwLock<HashSet<u64>>,
    faults: Mutex<Faults>,
    latency: Mutex<Duration>,
    listing_requests: AtomicU64,
    parse_requests: AtomicU64,
    failed_requests: AtomicU64,
    parse_log: Mutex<Vec<(u64, Instant)>>,
}

/// Running mock server; stops when dropped.
pub struct MockWiki {
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    state: Arc<State>,
    workers: Vec<JoinHandle<()>>,
}

impl MockWiki {
    /// Serve `pages` on an ephemeral loopback port.
    pub fn start(pages: Vec<MockPage>) -> std::io::Result<Self> {
        Self::bind("127.0.0.1:0", pages)
    }

    pub fn bind(addr: &str, pages: Vec<MockPage>) -> std::io::Result<Self> {
        let server = tiny_http::Server::http(addr)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::AddrInUse, e.to_string()))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("not an IP listener"))?;
        let server = Arc::new(server);
        let state = Arc::new(State::default());
        *state.pages.write().unwrap() = pages.into_iter().map(|p| (p.page_id, p)).collect();
        let workers = (0..8)
            .map(|_| {
                let (server, state) = (server.clone(), state.clone());
                std::thread::spawn(move || {
                    while let Ok(req) = server.recv() {
                        handle(&state, req);
                    }
                })
            })
            .collect();
        Ok(MockWiki {
            addr,
            server,
            state,
            workers,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// URL of the Action API endpoint.
    pub fn api_url(&self) -> String {
        format!("http://{}/w/api.php", self.addr)
    }

    /// The listing batch `batch` (1-based) answers 503 the next `times` times.
    pub fn fail_listing_batch(&self, batch: u64, times: u32) {
        self.state
            .faults
            .lock()
            .unwrap()
            .listing
            .insert(batch, times);
    }

    /// Fetching `page_id` answers 503 the next `times` times.
    pub fn fail_page(&self, page_id: u64, times: u32) {
        self.state
            .faults
            .lock()
            .unwrap()
            .parse
            .insert(page_id, times);
    }

    /// Every parse request answers 503 until switched off.
    pub fn set_parse_outage(&self, on: bool) {
        self.state.faults.lock().unwrap().parse_always_fails = on;
    }

    /// Pretend the page was deleted after it was listed.
    pub fn delete_page(&self, page_id: u64) {
        self.state.deleted.write().unwrap().insert(page_id);
    }

    /// Extra delay before answering every request.
    pub fn set_latency(&self, d: Duration) {
        *self.state.latency.lock().unwrap() = d;
    }

    pub fn listing_requests(&self) -> u64 {
        self.state.listing_requests.load(Ordering::SeqCst)
    }

    pub fn parse_requests(&self) -> u64 {
        self.state.parse_requests.load(Ordering::SeqCst)
    }

    /// Requests answered with an injected 503.
    pub fn failed_requests(&self) -> u64 {
        self.state.failed_requests.load(Ordering::SeqCst)
    }

    /// Page ids of parse requests in arrival order.
    pub fn parse_log(&self) -> Vec<(u64, Instant)> {
        self.state.parse_log.lock().unwrap().clone()
    }
}

impl Drop for MockWiki {
    fn drop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn query_params(url: &str) -> HashMap<String, String> {
    let Some((_, q)) = url.split_once('?') else {
        return HashMap::new();
    };
    q.split('&')
        .map(|kv| {
            let (k, v) = kv.split_once('=').unwrap_or((kv, ""));
            let dec = |s: &str| {
                percent_decode_str(&s.replace('+', " "))
                    .decode_utf8_lossy()
                    .into_owned()
            };
            (dec(k), dec(v))
        })
        .collect()
}

fn respond_json(req: tiny_http::Request, status: u16, body: serde_json::Value) {
    let header = tiny_http::Header::from_bytes("Content-Type", "application/json; charset=utf-8")
        .expect("static header");
    let resp = tiny_http::Response::from_string(body.to_string())
        .with_status_code(status)
        .with_header(header);
    let _ = req.respond(resp);
}

fn unavailable(state: &State, req: tiny_http::Request) {
    state.failed_requests.fetch_add(1, Ordering::SeqCst);
    let _ = req.respond(tiny_http::Response::from_string("unavailable").with_status_code(503));
}

fn take_fault(map: &mut HashMap<u64, u32>, key: u64) -> bool {
    match map.get_mut(&key) {
        Some(n) if *n > 0 => {
            *n -= 1;
            true
        }
        _ => false,
    }
}

fn handle(state: &State, req: tiny_http::Request) {
    let latency = *state.latency.lock().unwrap();
    if !latency.is_zero() {
        std::thread::sleep(latency);
    }
    let url = req.url().to_owned();
    if !url.starts_with("/w/api.php") {
        let _ = req.respond(tiny_http::Response::from_string("not found").with_status_code(404));
        return;
    }
    let params = query_params(&url);
    match (
        params.get("action").map(String::as_str),
        params.get("list").map(String::as_str),
    ) {
        (Some("query"), Some("allpages")) => list_pages(state, req, &params),
        (Some("parse"), _) => parse_page(state, req, &params),
        _ => respond_json(
            req,
            200,
            json!({"error": {"code": "badvalue", "info": "unsupported request"}}),
        ),
    }
}

fn list_pages(state: &State, req: tiny_http::Request, params: &HashMap<String, String>) {
    state.listing_requests.fetch_add(1, Ordering::SeqCst);
    let limit: usize = params
        .get("aplimit")
        .and_then(|l| l.parse().ok())
        .unwrap_or(10)
        .clamp(1, 500);
    let skip_redirects = params.get("apfilterredir").map(String::as_str) == Some("nonredirects");
    let pages = state.pages.read().unwrap();
    let mut titles: Vec<&MockPage> = pages
        .values()
        .filter(|p| !(skip_redirects && p.redirect))
        .collect();
    titles.sort_by(|a, b| a.title.cmp(&b.title));
    let start = match params.get("apcontinue") {
        Some(c) => titles.partition_point(|p| p.title.as_str() < c.as_str()),
        None => 0,
    };
    let batch = (start / limit) as u64 + 1;
    if take_fault(&mut state.faults.lock().unwrap().listing, batch) {
        drop(pages);
        return unavailable(state, req);
    }
    let end = (start + limit).min(titles.len());
    let items: Vec<_> = titles[start..end]
        .iter()
        .map(|p| json!({"pageid": p.page_id, "ns": 0, "title": p.title}))
        .collect();
    let mut body = json!({"batchcomplete": true, "query": {"allpages": items}});
    if end < titles.len() {
        body["continue"] = json!({"apcontinue": titles[end].title, "continue": "-||"});
    }
    drop(pages);
    respond_json(req, 200, body);
}

fn parse_page(state: &State, req: tiny_http::Request, params: &HashMap<String, String>) {
    state.parse_requests.fetch_add(1, Ordering::SeqCst);
    let id: u64 = params
        .get("pageid")
        .and_then(|p| p.parse().ok())
        .unwrap_or(0);
    state.parse_log.lock().unwrap().push((id, Instant::now()));
    {
        let mut faults = state.faults.lock().unwrap();
        if faults.parse_always_fails || take_fault(&mut faults.parse, id) {
            drop(faults);
            return unavailable(state, req);
        }
    }
    let deleted = state.deleted.read().unwrap().contains(&id);
    let body = match state.pages.read().unwrap().get(&id) {
        Some(p) if !deleted => {
            json!({"parse": {"title": p.title, "pageid": p.page_id, "text": p.html}})
        }
        _ => {
            json!({"error": {"code": "nosuchpageid", "info": format!("There is no page with ID {id}.")}})
        }
    };
    respond_json(req, 200, body);
}

/// Write `pages` as an HTML dump (manifest plus one file per page).
pub fn write_dump(dir: &Path, pages: &[MockPage]) -> crate::Result<()> {
    let pages_dir = dir.join("pages");
    fs::create_dir_all(&pages_dir).ctx(|| format!("creating {}", pages_dir.display()))?;
    let mut manifest = String::new();
    for p in pages.iter().filter(|p| !p.redirect) {
        let rel = format!("pages/{}.html", p.page_id);
        fs::write(dir.join(&rel), &p.html).ctx(|| format!("writing {rel}"))?;
        writeln!(manifest, "{}\t{}\t{}", p.page_id, p.title, rel).expect("write to string");
    }
    fs::write(dir.join(MANIFEST_FILE), manifest).ctx(|| "writing dump manifest".to_owned())
}

/// A generated wiki with a known number of tables.
#[derive(Debug, Clone)]
pub struct FixtureWiki {
    pub pages: Vec<MockPage>,
    /// `<table>` elements planted across all content pages (nested ones included).
    pub planted_tables: usize,
    /// Content pages, i.e. everything but redirects.
    pub content_pages: usize,
}

const WORDS: [&str; 16] = [
    "город",
    "река",
    "год",
    "население",
    "команда",
    "сезон",
    "матч",
    "область",
    "Moscow",
    "club",
    "район",
    "площадь",
    "история",
    "гора",
    "остров",
    "league",
];

struct Lcg(u64);

impl Lcg {
    fn next(&mut self, n: u64) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 33) % n
    }

    fn word(&mut self) -> &'static str {
        WORDS[self.next(WORDS.len() as u64) as usize]
    }

    fn sentence(&mut self, n: usize) -> String {
        (0..n).map(|_| self.word()).collect::<Vec<_>>().join(" ")
    }
}

fn fixture_table(rng: &mut Lcg, nested: bool) -> String {
    let rows = 1 + rng.next(5) as usize;
    let cols = 1 + rng.next(5) as usize;
    let mut s = String::from("<table class=\"wikitable\">");
    if rng.next(3) == 0 {
        let _ = write!(s, "<caption>{}</caption>", rng.sentence(2));
    }
    s.push_str("<tr>");
    for c in 0..cols {
        let _ = write!(
            s,
            "<th>{}</th>",
            if c == 0 {
                "Год".to_owned()
            } else {
                rng.word().to_owned()
            }
        );
    }
    s.push_str("</tr>");
    for r in 0..rows {
        s.push_str("<tr>");
        let mut c = 0;
        while c < cols {
            let kind = rng.next(6);
            if kind == 0 && c + 1 < cols {
                let _ = write!(s, "<td colspan=\"2\">{}</td>", rng.word());
                c += 2;
                continue;
            }
            let text = match kind {
                1 => format!("{}", 1900 + rng.next(120)),
                2 => String::new(),
                3 => format!("{}[{}]", rng.word(), 1 + rng.next(9)),
                _ => {
                    let n = 1 + rng.next(3) as usize;
                    rng.sentence(n)
                }
            };
            if nested && r == 0 && c == 0 {
                let _ = write!(
                    s,
                    "<td>{text}<table><tr><td>вложенная</td><td>1</td></tr></table></td>"
                );
            } else {
                let _ = write!(s, "<td>{text}</td>");
            }
            c += 1;
        }
        s.push_str("</tr>");
    }
    s.push_str("</table>");
    s
}

/// Deterministic wiki of `n` content pages plus a couple of redirects.
///
/// Page `i` carries `i % 4` top-level tables, every tenth page nests one extra
/// table, and a few pages hold no tables at all.
pub fn fixture_wiki(n: usize) -> FixtureWiki {
    let mut pages = Vec::with_capacity(n + 2);
    let mut planted = 0;
    for i in 0..n {
        let mut rng = Lcg(i as u64 + 17);
        let tables = i % 4;
        let nested = tables > 0 && i % 10 == 1;
        let lead = 5 + rng.next(40) as usize;
        let mut html = format!(
            "<div class=\"mw-parser-output\"><p>{}</p>",
            rng.sentence(lead)
        );
        for t in 0..tables {
            if t == 1 {
                let n = 3 + rng.next(20) as usize;
                let _ = write!(html, "<h2>Раздел {t}</h2><p>{}</p>", rng.sentence(n));
            }
            html.push_str(&fixture_table(&mut rng, nested && t == 0));
            let n = rng.next(10) as usize;
            let _ = write!(html, "<p>{}</p>", rng.sentence(n));
            planted += 1;
        }
        if nested {
            planted += 1;
        }
        html.push_str("</div>");
        // ids are spread out so pages land in different shards
        let page_id = 1000 + 37 * i as u64;
        pages.push(MockPage::new(page_id, &format!("Статья {i:04}"), &html));
    }
    for j in 0..2u64 {
        pages.push(MockPage {
            redirect: true,
            ..MockPage::new(900 + j, &format!("Перенаправление {j}"), "<p>redirect</p>")
        });
    }
    FixtureWiki {
        pages,
        planted_tables: planted,
        content_pages: n,
    }
}
