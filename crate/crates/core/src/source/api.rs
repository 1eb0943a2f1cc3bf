use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use rand::Rng;
use serde_json::Value;

use super::{
    FetchOutcome, PageOrigin, PageRef, PageSource, RateLimiter, RawPage, SourceConfig, SourceError,
};

/// `base × 2^attempt`, scaled by a jitter factor in `[0.8, 1.2]`.
pub fn backoff_delay(base_ms: u64, attempt: u32, rng: &mut impl Rng) -> Duration {
    let exp = base_ms.saturating_mul(1u64 << attempt.min(20));
    let jitter: f64 = rng.gen_range(0.8..=1.2);
    Duration::from_secs_f64(exp as f64 * jitter / 1000.0)
}

/// Request counters, shared between clones of a client.
#[derive(Debug, Default)]
pub struct ClientStats {
    pub requests: AtomicU64,
    pub retries: AtomicU64,
}

/// MediaWiki Action API client: title listing with continuation and page HTML via
/// `action=parse`.
#[derive(Clone)]
pub struct ApiClient {
    cfg: SourceConfig,
    endpoint: String,
    agent: ureq::Agent,
    limiter: Arc<RateLimiter>,
    stats: Arc<ClientStats>,
}

enum Reply {
    Json(Value),
    NotFound,
}

const EXCERPT_LEN: usize = 200;

fn excerpt(s: &str) -> String {
    s.chars().take(EXCERPT_LEN).collect()
}

impl ApiClient {
    pub fn new(cfg: SourceConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(cfg.request_timeout))
            .user_agent(&cfg.user_agent)
            .build();
        let limiter = Arc::new(RateLimiter::new(
            cfg.max_concurrent_requests,
            cfg.min_interval(),
        ));
        ApiClient {
            endpoint: cfg.api_base_url.clone().unwrap_or_default(),
            cfg,
            agent,
            limiter,
            stats: Arc::default(),
        }
    }

    pub fn stats(&self) -> &ClientStats {
        &self.stats
    }

    pub fn limiter(&self) -> &RateLimiter {
        &self.limiter
    }

    /// Stream every non-redirect page of namespace 0.
    pub fn list_page_titles(&self) -> TitleStream<'_> {
        self.list_page_titles_from(None)
    }

    /// Continue a listing that failed, using the token carried by the error.
    pub fn list_page_titles_from(&self, continuation: Option<String>) -> TitleStream<'_> {
        TitleStream {
            client: self,
            buffer: VecDeque::new(),
            continuation,
            done: false,
            requests: 0,
            yielded: 0,
        }
    }

    fn get(
        &self,
        params: &[(&str, &str)],
        continuation: Option<&str>,
    ) -> Result<Reply, SourceError> {
        let mut rng = rand::thread_rng();
        let mut last_error = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                self.stats.retries.fetch_add(1, Ordering::Relaxed);
                std::thread::sleep(backoff_delay(self.cfg.backoff_base, attempt - 1, &mut rng));
            }
            let mut req = self.agent.get(&self.endpoint);
            for (k, v) in params {
                req = req.query(k, v);
            }
            let result = {
                let _permit = self.limiter.acquire();
                self.stats.requests.fetch_add(1, Ordering::Relaxed);
                req.call()
            };
            match result {
                Ok(resp) => {
                    let body = resp.into_string().map_err(|e| SourceError::Network {
                        message: format!("reading response body: {e}"),
                        continuation: continuation.map(str::to_owned),
                    })?;
                    return serde_json::from_str(&body).map(Reply::Json).map_err(|e| {
                        SourceError::Malformed {
                            reason: e.to_string(),
                            excerpt: excerpt(&body),
                        }
                    });
                }
                Err(ureq::Error::Status(404, _)) => return Ok(Reply::NotFound),
                Err(ureq::Error::Status(code, _)) if code == 429 || code >= 500 => {
                    last_error = format!("HTTP {code}");
                }
                Err(ureq::Error::Status(code, _)) => {
                    return Err(SourceError::Http {
                        status: code,
                        url: self.endpoint.clone(),
                    })
                }
                Err(ureq::Error::Transport(t)) => last_error = t.to_string(),
            }
            log::debug!(
                "request to {} failed (attempt {attempt}): {last_error}",
                self.endpoint
            );
        }
        Err(SourceError::Network {
            message: last_error,
            continuation: continuation.map(str::to_owned),
        })
    }

    fn list_batch(
        &self,
        continuation: Option<&str>,
    ) -> Result<(Vec<PageRef>, Option<String>), SourceError> {
        let limit = self.cfg.page_limit.to_string();
        let mut params = vec![
            ("action", "query"),
            ("list", "allpages"),
            ("apnamespace", "0"),
            ("apfilterredir", "nonredirects"),
            ("aplimit", limit.as_str()),
            ("format", "json"),
            ("formatversion", "2"),
        ];
        if let Some(c) = continuation {
            params.push(("apcontinue", c));
        }
        let json = match self.get(&params, continuation)? {
            Reply::Json(v) => v,
            Reply::NotFound => {
                return Err(SourceError::Http {
                    status: 404,
                    url: self.endpoint.clone(),
                })
            }
        };
        let malformed = |reason: &str| SourceError::Malformed {
            reason: reason.to_owned(),
            excerpt: excerpt(&json.to_string()),
        };
        if let Some(err) = json.get("error") {
            return Err(malformed(&format!("API error {err}")));
        }
        let pages = json
            .pointer("/query/allpages")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed("missing query.allpages"))?;
        let refs = pages
            .iter()
            .map(|p| {
                let page_id = p.get("pageid").and_then(Value::as_u64).filter(|&id| id > 0);
                let title = p
                    .get("title")
                    .and_then(Value::as_str)
                    .filter(|t| !t.is_empty());
                match (page_id, title) {
                    (Some(id), Some(t)) => Ok(PageRef {
                        page_id: id,
                        title: t.to_owned(),
                        namespace: p.get("ns").and_then(Value::as_i64).unwrap_or(0) as i32,
                    }),
                    _ => Err(malformed("allpages entry without pageid/title")),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let next = match json.pointer("/continue/apcontinue") {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(malformed("continue.apcontinue is not a string")),
        };
        Ok((refs, next))
    }

    /// Rendered HTML of the current revision of `page`.
    pub fn fetch_page(&self, page: &PageRef) -> Result<FetchOutcome, SourceError> {
        let id = page.page_id.to_string();
        let params = [
            ("action", "parse"),
            ("pageid", id.as_str()),
            ("prop", "text"),
            ("disableeditsection", "1"),
            ("format", "json"),
            ("formatversion", "2"),
        ];
        let json = match self.get(&params, None)? {
            Reply::Json(v) => v,
            Reply::NotFound => return Ok(FetchOutcome::Missing),
        };
        if let Some(code) = json.pointer("/error/code").and_then(Value::as_str) {
            if matches!(code, "missingtitle" | "nosuchpageid" | "missingpage") {
                return Ok(FetchOutcome::Missing);
            }
        }
        let html = json
            .pointer("/parse/text")
            .and_then(|t| t.as_str().or_else(|| t.get("*").and_then(Value::as_str)))
            .ok_or_else(|| SourceError::Malformed {
                reason: "missing parse.text".into(),
                excerpt: excerpt(&json.to_string()),
            })?;
        Ok(FetchOutcome::Page(RawPage {
            page: page.clone(),
            html: html.to_owned(),
            fetched_at: Utc::now(),
            source: PageOrigin::Api,
            url: self.cfg.page_url(&page.title),
        }))
    }
}

impl PageSource for ApiClient {
    fn titles(&self) -> Box<dyn Iterator<Item = Result<PageRef, SourceError>> + Send + '_> {
        Box::new(self.list_page_titles())
    }

    fn fetch(&self, page: &PageRef) -> Result<FetchOutcome, SourceError> {
        self.fetch_page(page)
    }
}

/// Lazy title listing. Holds at most one API batch in memory and stops after the
/// first error.
pub struct TitleStream<'a> {
    client: &'a ApiClient,
    buffer: VecDeque<PageRef>,
    continuation: Option<String>,
    done: bool,
    requests: u64,
    yielded: u64,
}

impl TitleStream<'_> {
    /// Listing requests issued so far (retries not included).
    pub fn requests(&self) -> u64 {
        self.requests
    }

    /// Titles handed out so far; the total once the stream is exhausted.
    pub fn yielded(&self) -> u64 {
        self.yielded
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Token to resume from after an error.
    pub fn continuation(&self) -> Option<&str> {
        self.continuation.as_deref()
    }
}

impl Iterator for TitleStream<'_> {
    type Item = Result<PageRef, SourceError>;

    fn next(&mut self) -> Option<Self::Item> {
        while self.buffer.is_empty() {
            if self.done {
                return None;
            }
            self.requests += 1;
            match self.client.list_batch(self.continuation.as_deref()) {
                Ok((batch, next)) => {
                    self.buffer.extend(batch);
                    self.done = next.is_none();
                    if next.is_some() {
                        self.continuation = next;
                    }
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
        self.yielded += 1;
        self.buffer.pop_front().map(Ok)
    }
}
