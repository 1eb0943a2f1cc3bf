//! Where pages come from: the MediaWiki Action API or an offline HTML dump.
//!
//! Both paths produce the same [`RawPage`] values, so everything downstream is
//! unaware of the origin of a page.

mod api;
mod dump;
mod ratelimit;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use percent_encoding::{utf8_percent_encode, AsciiSet, CONTROLS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use api::{backoff_delay, ApiClient, ClientStats, TitleStream};
pub use dump::{read_dump, DumpReader, DumpSource, MANIFEST_FILE};
pub use ratelimit::{Permit, RateLimiter};

/// Used for page URLs when the configuration gives neither an API endpoint nor an
/// explicit base.
pub const DEFAULT_PAGE_URL_BASE: &str = "https://ru.wikipedia.org/wiki/";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PageRef {
    pub page_id: u64,
    pub title: String,
    pub namespace: i32,
}

impl PageRef {
    /// A content-namespace page.
    pub fn new(page_id: u64, title: impl Into<String>) -> Self {
        PageRef {
            page_id,
            title: title.into(),
            namespace: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PageOrigin {
    Api,
    Dump,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPage {
    pub page: PageRef,
    pub html: String,
    pub fetched_at: DateTime<Utc>,
    pub source: PageOrigin,
    /// Public URL of the page, as stored in table metadata.
    pub url: String,
}

impl RawPage {
    pub fn from_dump(page: PageRef, html: String, url: String) -> Self {
        RawPage {
            page,
            html,
            fetched_at: Utc::now(),
            source: PageOrigin::Dump,
            url,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchOutcome {
    Page(RawPage),
    /// The page no longer exists (deleted or moved away since listing).
    Missing,
}

#[derive(Debug, Clone, Error)]
pub enum SourceError {
    /// Network trouble that outlasted the retry budget. Listing can be resumed from
    /// `continuation`.
    #[error("network failure after retries: {message}")]
    Network {
        message: String,
        continuation: Option<String>,
    },
    #[error("HTTP status {status} from {url}")]
    Http { status: u16, url: String },
    #[error("malformed API response: {reason}; payload starts with {excerpt:?}")]
    Malformed { reason: String, excerpt: String },
    #[error("dump is unreadable at byte {offset}: {message}")]
    CorruptDump { offset: u64, message: String },
    #[error("dump manifest is truncated at byte {offset}")]
    TruncatedDump { offset: u64 },
    #[error("unsupported dump format: {0}")]
    UnsupportedDump(String),
}

impl SourceError {
    /// Whether retrying the same job later may succeed.
    pub fn is_retriable(&self) -> bool {
        matches!(self, SourceError::Network { .. })
    }
}

mod defaults {
    pub fn user_agent() -> String {
        format!(
            "wikitables/{} (table corpus builder)",
            crate::TOOLKIT_VERSION
        )
    }
    pub fn max_concurrent_requests() -> usize {
        2
    }
    pub fn min_request_interval() -> u64 {
        100
    }
    pub fn max_retries() -> u32 {
        5
    }
    pub fn backoff_base() -> u64 {
        500
    }
    pub fn page_limit() -> u32 {
        500
    }
    pub fn request_timeout() -> u64 {
        30_000
    }
}

/// Where and how to read pages. Durations are in milliseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default)]
    pub api_base_url: Option<String>,
    #[serde(default)]
    pub dump_path: Option<PathBuf>,
    /// Prefix for page URLs; derived from `api_base_url` when absent.
    #[serde(default)]
    pub page_url_base: Option<String>,
    #[serde(default = "defaults::user_agent")]
    pub user_agent: String,
    #[serde(default = "defaults::max_concurrent_requests")]
    pub max_concurrent_requests: usize,
    #[serde(default = "defaults::min_request_interval")]
    pub min_request_interval: u64,
    #[serde(default = "defaults::max_retries")]
    pub max_retries: u32,
    #[serde(default = "defaults::backoff_base")]
    pub backoff_base: u64,
    /// `aplimit` for title listing requests.
    #[serde(default = "defaults::page_limit")]
    pub page_limit: u32,
    #[serde(default = "defaults::request_timeout")]
    pub request_timeout: u64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            api_base_url: None,
            dump_path: None,
            page_url_base: None,
            user_agent: defaults::user_agent(),
            max_concurrent_requests: defaults::max_concurrent_requests(),
            min_request_interval: defaults::min_request_interval(),
            max_retries: defaults::max_retries(),
            backoff_base: defaults::backoff_base(),
            page_limit: defaults::page_limit(),
            request_timeout: defaults::request_timeout(),
        }
    }
}

/// Characters escaped in page URLs, on top of everything non-ASCII.
const TITLE_ESCAPES: &AsciiSet = &CONTROLS
    .add(b' ')
    .add(b'"')
    .add(b'#')
    .add(b'%')
    .add(b'<')
    .add(b'>')
    .add(b'?')
    .add(b'[')
    .add(b']')
    .add(b'\\')
    .add(b'^')
    .add(b'`')
    .add(b'{')
    .add(b'|')
    .add(b'}');

impl SourceConfig {
    pub fn api(url: impl Into<String>) -> Self {
        SourceConfig {
            api_base_url: Some(url.into()),
            ..Default::default()
        }
    }

    pub fn dump(path: impl Into<PathBuf>) -> Self {
        SourceConfig {
            dump_path: Some(path.into()),
            ..Default::default()
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match (&self.api_base_url, &self.dump_path) {
            (Some(_), Some(_)) => out.push("set either api_base_url or dump_path, not both".into()),
            (None, None) => out.push("one of api_base_url or dump_path is required".into()),
            (Some(u), None) if !(u.starts_with("http://") || u.starts_with("https://")) => {
                out.push(format!("api_base_url must be an http(s) URL, got {u:?}"))
            }
            _ => {}
        }
        if self.max_concurrent_requests == 0 {
            out.push("max_concurrent_requests must be at least 1".into());
        }
        if self.page_limit == 0 {
            out.push("page_limit must be at least 1".into());
        }
        out
    }

    pub fn min_interval(&self) -> Duration {
        Duration::from_millis(self.min_request_interval)
    }

    fn url_base(&self) -> String {
        if let Some(b) = &self.page_url_base {
            return b.clone();
        }
        if let Some(api) = &self.api_base_url {
            if let Some(i) = api.find("/w/api.php") {
                return format!("{}/wiki/", &api[..i]);
            }
            if let Some(i) = api.rfind('/') {
                if i > "https://".len() {
                    return format!("{}/wiki/", &api[..i]);
                }
            }
        }
        DEFAULT_PAGE_URL_BASE.to_owned()
    }

    /// Public URL of a page with the given title.
    pub fn page_url(&self, title: &str) -> String {
        let t = title.replace(' ', "_");
        format!(
            "{}{}",
            self.url_base(),
            utf8_percent_encode(&t, TITLE_ESCAPES)
        )
    }
}

/// Anything that can list and fetch pages.
pub trait PageSource: Send + Sync {
    /// All content pages. Order is up to the source.
    fn titles(&self) -> Box<dyn Iterator<Item = Result<PageRef, SourceError>> + Send + '_>;

    fn fetch(&self, page: &PageRef) -> Result<FetchOutcome, SourceError>;
}

/// Build the source selected by `cfg`.
pub fn open_source(cfg: &SourceConfig) -> crate::Result<Arc<dyn PageSource>> {
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(crate::Error::Validation(problems));
    }
    if cfg.dump_path.is_some() {
        Ok(Arc::new(DumpSource::open(cfg)?))
    } else {
        Ok(Arc::new(ApiClient::new(cfg.clone())))
    }
}
