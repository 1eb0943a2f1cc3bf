use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "wikitables",
    version,
    about = "Build and query corpora of wiki tables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crawl a wiki or a dump into a corpus, showing progress.
    Crawl(Box<CrawlArgs>),
    /// Print corpus statistics and optionally write the report files.
    Stats(StatsArgs),
    /// Search table metadata.
    Search(SearchArgs),
    /// Derive a filtered corpus from an existing one.
    Refilter(RefilterArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Serve a generated wiki on the MediaWiki API, or write it as a dump.
    MockWiki(MockWikiArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceKind {
    Api,
    Dump,
    /// Start a generated wiki in-process and crawl it.
    Mock,
}

/// Flags for every `FilterConfig` field.
#[derive(Debug, Default, Clone, Args)]
pub struct FilterFlags {
    #[arg(long)]
    pub min_cyrillic_ratio: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub drop_latin_only_columns: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub drop_numeric_only_columns: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub drop_mostly_null_rows: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub drop_mostly_null_columns: Option<bool>,
    #[arg(long)]
    pub null_threshold: Option<f64>,
    #[arg(long)]
    pub min_rows: Option<usize>,
    #[arg(long)]
    pub min_cols: Option<usize>,
}

/// Flags for every `SourceConfig` field.
#[derive(Debug, Default, Clone, Args)]
pub struct SourceFlags {
    #[arg(long)]
    pub api_url: Option<String>,
    #[arg(long)]
    pub dump_path: Option<PathBuf>,
    #[arg(long)]
    pub page_url_base: Option<String>,
    #[arg(long)]
    pub user_agent: Option<String>,
    #[arg(long)]
    pub max_concurrent_requests: Option<usize>,
    /// Milliseconds between request starts.
    #[arg(long)]
    pub min_request_interval: Option<u64>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Base backoff delay in milliseconds.
    #[arg(long)]
    pub backoff_base: Option<u64>,
    #[arg(long)]
    pub page_limit: Option<u32>,
    /// Per-request timeout in milliseconds.
    #[arg(long)]
    pub request_timeout: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CrawlArgs {
    /// Job config file (JSON, or TOML with a .toml extension). Flags win over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub source: Option<SourceKind>,
    /// Snapshot date, YYYY-MM-DD.
    #[arg(long)]
    pub snapshot_date: Option<String>,
    #[arg(long, alias = "corpus")]
    pub corpus_root: Option<PathBuf>,
    #[arg(long, alias = "chunks")]
    pub chunk_count: Option<usize>,
    #[arg(long)]
    pub chunk_index: Option<usize>,
    #[arg(long, alias = "workers")]
    pub worker_count: Option<usize>,
    /// Regex over table `class` attributes; matching tables are skipped.
    #[arg(long)]
    pub exclude_table_classes: Option<String>,
    /// Content pages of the generated wiki with `--source mock`.
    #[arg(long, default_value_t = 100)]
    pub mock_pages: usize,
    /// Only print the final summary.
    #[arg(long, short)]
    pub quiet: bool,
    #[command(flatten)]
    pub source_flags: SourceFlags,
    #[command(flatten)]
    pub filters: FilterFlags,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Filter config applied before counting: a filter document or a job document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
    /// Also write the report files under `<corpus>/reports`.
    #[arg(long)]
    pub reports: bool,
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    #[arg(long, default_value_t = 3)]
    pub rich_min_rows: usize,
    #[arg(long, default_value_t = 5)]
    pub rich_min_cols: usize,
    #[command(flatten)]
    pub filters: FilterFlags,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Query document (JSON or TOML). Flags win over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub title_substring: Option<String>,
    #[arg(long)]
    pub caption_substring: Option<String>,
    #[arg(long)]
    pub min_rows: Option<usize>,
    #[arg(long)]
    pub max_rows: Option<usize>,
    #[arg(long)]
    pub min_cols: Option<usize>,
    #[arg(long)]
    pub max_cols: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub has_numeric_column: Option<bool>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub offset: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RefilterArgs {
    /// Corpus to read.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory for the derived corpus.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub filters: FilterFlags,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "WIKITABLES_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    #[arg(long, env = "WIKITABLES_STATE_DIR", default_value = "wikitables-state")]
    pub state_dir: PathBuf,
    /// Corpus served by `/corpus/*` when no `job` parameter is given.
    #[arg(long, env = "WIKITABLES_CORPUS")]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MockWikiArgs {
    #[arg(long, default_value = "127.0.0.1:8081")]
    pub bind: String,
    #[arg(long, default_value_t = 100)]
    pub pages: usize,
    /// Write the pages as a dump directory instead of serving them.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Delay added to every response, in milliseconds.
    #[arg(long, default_value_t = 0)]
    pub latency: u64,
}
