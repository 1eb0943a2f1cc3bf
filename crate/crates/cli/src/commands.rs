use std::io::{IsTerminal, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use wikitables_core::controller::{run_job, JobPhase};
use wikitables_core::mockwiki::{fixture_wiki, write_dump, MockWiki};
use wikitables_core::stats::{compute_stats, render_stats, search, write_reports, ReportOptions};
use wikitables_core::store::{refilter_corpus, Corpus};
use wikitables_core::Error;

use crate::args::{
    Cli, Command, CrawlArgs, MockWikiArgs, RefilterArgs, SearchArgs, SourceKind, StatsArgs,
};
use crate::config;
use crate::progress;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config documents or queries.
    Usage(String),
    /// Everything that went wrong while doing the work.
    Operation(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Operation(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Operation(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation(_) | Error::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Operation(other.to_string()),
        }
    }
}

fn io_err(context: &str, e: std::io::Error) -> CliError {
    CliError::Operation(format!("{context}: {e}"))
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Crawl(a) => crawl(&a),
        Command::Stats(a) => stats(&a),
        Command::Search(a) => search_cmd(&a),
        Command::Refilter(a) => refilter(&a),
        Command::Serve(a) => {
            crate::server::serve_blocking(a.bind, &a.state_dir, a.corpus.as_deref())
        }
        Command::MockWiki(a) => mock_wiki(&a),
    }
}

fn crawl(a: &CrawlArgs) -> Result<(), CliError> {
    let wiki = match a.source {
        Some(SourceKind::Mock) => {
            let fx = fixture_wiki(a.mock_pages);
            Some(MockWiki::start(fx.pages).map_err(|e| io_err("starting the mock wiki", e))?)
        }
        _ => None,
    };
    let url = wiki.as_ref().map(MockWiki::api_url);
    let cfg = config::job_config(a, url.as_deref())?;
    match a.source {
        Some(SourceKind::Api) if cfg.source.api_base_url.is_none() => {
            return Err(CliError::Usage(
                "--source api needs --api-url or source.api_base_url".into(),
            ))
        }
        Some(SourceKind::Dump) if cfg.source.dump_path.is_none() => {
            return Err(CliError::Usage(
                "--source dump needs --dump-path or source.dump_path".into(),
            ))
        }
        _ => {}
    }

    let handle = run_job(cfg)?;
    let tty = std::io::stderr().is_terminal();
    let mut last_line = Instant::now() - Duration::from_secs(60);
    while handle.is_running() {
        std::thread::sleep(Duration::from_millis(200));
        if a.quiet {
            continue;
        }
        let line = progress::render(&handle.progress());
        if tty {
            eprint!("\r\x1b[2K{line}");
            let _ = std::io::stderr().flush();
        } else if last_line.elapsed() >= Duration::from_secs(5) {
            eprintln!("{line}");
            last_line = Instant::now();
        }
    }
    let st = handle.wait();
    if !a.quiet {
        if tty {
            eprintln!("\r\x1b[2K{}", progress::render(&st));
        } else {
            eprintln!("{}", progress::render(&st));
        }
    }
    println!(
        "{} pages done, {} tables written, {} missing, {} unparsed",
        st.pages_done, st.tables_written, st.pages_missing, st.pages_unparsed
    );
    match st.phase {
        JobPhase::Finished => Ok(()),
        _ => Err(CliError::Operation(format!(
            "crawl stopped: {}; run the same command again to resume",
            st.error.as_deref().unwrap_or("unknown error")
        ))),
    }
}

fn stats(a: &StatsArgs) -> Result<(), CliError> {
    let filters = config::filter_config(a.config.as_deref(), &a.filters)?;
    let s = compute_stats(&a.corpus, filters.as_ref())?;
    if a.reports {
        let opts = ReportOptions {
            top_n: a.top_n,
            rich_min_rows: a.rich_min_rows,
            rich_min_cols: a.rich_min_cols,
        };
        write_reports(&a.corpus, &opts)?;
    }
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&s).expect("stats serialize")
        );
    } else {
        print!("{}", render_stats(&s));
    }
    Ok(())
}

fn search_cmd(a: &SearchArgs) -> Result<(), CliError> {
    let q = config::query_spec(a)?;
    let page = search(&a.corpus, &q)?;
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&page).expect("search results serialize")
        );
        return Ok(());
    }
    for m in &page.tables {
        println!(
            "{}\t{}x{}\t{}\t{}",
            m.table_id,
            m.n_cols,
            m.n_rows,
            m.page_title,
            m.caption.as_deref().unwrap_or("")
        );
    }
    eprintln!(
        "{} of {} matches (offset {})",
        page.tables.len(),
        page.total,
        page.offset
    );
    Ok(())
}

fn refilter(a: &RefilterArgs) -> Result<(), CliError> {
    let cfg = config::filter_config(a.config.as_deref(), &a.filters)?.unwrap_or_default();
    if same_dir(&a.corpus, &a.out) {
        return Err(CliError::Usage("--out must differ from --corpus".into()));
    }
    let summary = refilter_corpus(&Corpus::new(&a.corpus), &Corpus::new(&a.out), &cfg)?;
    println!(
        "{} of {} tables kept in {}",
        summary.tables_out,
        summary.tables_in,
        a.out.display()
    );
    Ok(())
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn mock_wiki(a: &MockWikiArgs) -> Result<(), CliError> {
    let fx = fixture_wiki(a.pages);
    if let Some(dir) = &a.dump {
        write_dump(dir, &fx.pages)?;
        println!(
            "wrote {} pages ({} tables) to {}",
            fx.pages.len(),
            fx.planted_tables,
            dir.display()
        );
        return Ok(());
    }
    let planted = fx.planted_tables;
    let wiki =
        MockWiki::bind(&a.bind, fx.pages).map_err(|e| io_err(&format!("binding {}", a.bind), e))?;
    if a.latency > 0 {
        wiki.set_latency(Duration::from_millis(a.latency));
    }
    println!("{}", wiki.api_url());
    println!("{} content pages, {planted} tables", a.pages);
    let _ = std::io::stdout().flush();
    loop {
        std::thread::park();
    }
}
