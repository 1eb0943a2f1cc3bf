//! Config documents merged with command-line flags. Flags always win.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use wikitables_core::controller::JobConfig;
use wikitables_core::filter::FilterConfig;
use wikitables_core::stats::QuerySpec;

use crate::args::{CrawlArgs, FilterFlags, SearchArgs, SourceFlags};
use crate::commands::CliError;

/// Read a JSON document, or TOML when the file ends in `.toml`.
pub fn load_document(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let is_toml = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let doc = if is_toml {
        let v: toml::Value = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::to_value(v).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    };
    if !doc.is_object() {
        return Err(CliError::Usage(format!(
            "{} must hold a single object",
            path.display()
        )));
    }
    Ok(doc)
}

fn load_or_empty(path: Option<&Path>) -> Result<Value, CliError> {
    match path {
        Some(p) => load_document(p),
        None => Ok(Value::Object(Map::new())),
    }
}

/// Set `doc[path...] = value`, creating objects on the way.
pub fn set(doc: &mut Value, path: &[&str], value: Value) {
    let mut cur = doc;
    for key in &path[..path.len() - 1] {
        if !cur.get(*key).is_some_and(Value::is_object) {
            cur[*key] = Value::Object(Map::new());
        }
        cur = &mut cur[*key];
    }
    cur[path[path.len() - 1]] = value;
}

fn set_opt<T: serde::Serialize>(doc: &mut Value, path: &[&str], value: &Option<T>) {
    if let Some(v) = value {
        set(
            doc,
            path,
            serde_json::to_value(v).expect("flag values serialize"),
        );
    }
}

fn parse<T: DeserializeOwned>(doc: Value, what: &str) -> Result<T, CliError> {
    serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("invalid {what}: {e}")))
}

fn overlay_filters(doc: &mut Value, prefix: &[&str], f: &FilterFlags) {
    let p = |k: &'static str| -> Vec<&str> { prefix.iter().copied().chain([k]).collect() };
    set_opt(doc, &p("min_cyrillic_ratio"), &f.min_cyrillic_ratio);
    set_opt(
        doc,
        &p("drop_latin_only_columns"),
        &f.drop_latin_only_columns,
    );
    set_opt(
        doc,
        &p("drop_numeric_only_columns"),
        &f.drop_numeric_only_columns,
    );
    set_opt(doc, &p("drop_mostly_null_rows"), &f.drop_mostly_null_rows);
    set_opt(
        doc,
        &p("drop_mostly_null_columns"),
        &f.drop_mostly_null_columns,
    );
    set_opt(doc, &p("null_threshold"), &f.null_threshold);
    set_opt(doc, &p("min_rows"), &f.min_rows);
    set_opt(doc, &p("min_cols"), &f.min_cols);
}

fn overlay_source(doc: &mut Value, s: &SourceFlags) {
    set_opt(doc, &["source", "api_base_url"], &s.api_url);
    set_opt(doc, &["source", "dump_path"], &s.dump_path);
    set_opt(doc, &["source", "page_url_base"], &s.page_url_base);
    set_opt(doc, &["source", "user_agent"], &s.user_agent);
    set_opt(
        doc,
        &["source", "max_concurrent_requests"],
        &s.max_concurrent_requests,
    );
    set_opt(
        doc,
        &["source", "min_request_interval"],
        &s.min_request_interval,
    );
    set_opt(doc, &["source", "max_retries"], &s.max_retries);
    set_opt(doc, &["source", "backoff_base"], &s.backoff_base);
    set_opt(doc, &["source", "page_limit"], &s.page_limit);
    set_opt(doc, &["source", "request_timeout"], &s.request_timeout);
}

/// Job document from `--config` with every given flag written over it.
/// `mock_url` replaces the API URL when the crawl targets an in-process wiki.
pub fn job_config(a: &CrawlArgs, mock_url: Option<&str>) -> Result<JobConfig, CliError> {
    let mut doc = load_or_empty(a.config.as_deref())?;
    set_opt(&mut doc, &["snapshot_date"], &a.snapshot_date);
    set_opt(&mut doc, &["corpus_root"], &a.corpus_root);
    set_opt(&mut doc, &["chunk_count"], &a.chunk_count);
    set_opt(&mut doc, &["chunk_index"], &a.chunk_index);
    set_opt(&mut doc, &["worker_count"], &a.worker_count);
    set_opt(
        &mut doc,
        &["extract", "exclude_table_classes"],
        &a.exclude_table_classes,
    );
    overlay_source(&mut doc, &a.source_flags);
    overlay_filters(&mut doc, &["filters"], &a.filters);
    if doc.get("source").is_none() {
        set(&mut doc, &["source"], Value::Object(Map::new()));
    }
    if let Some(url) = mock_url {
        set(
            &mut doc,
            &["source", "api_base_url"],
            Value::String(url.into()),
        );
        if let Some(src) = doc["source"].as_object_mut() {
            src.remove("dump_path");
        }
    }
    let cfg: JobConfig = parse(doc, "job config")?;
    cfg.validate().map_err(CliError::from)?;
    Ok(cfg)
}

/// Filter config from a filter document or the `filters` part of a job document,
/// with flags written over it. `None` when neither a file nor a flag is given.
pub fn filter_config(
    path: Option<&Path>,
    f: &FilterFlags,
) -> Result<Option<FilterConfig>, CliError> {
    let mut doc = load_or_empty(path)?;
    if let Some(inner) = doc.get("filters").filter(|v| v.is_object()) {
        doc = inner.clone();
    } else if ["snapshot_date", "source", "corpus_root"]
        .iter()
        .any(|k| doc.get(*k).is_some())
    {
        // a job document without filters
        doc = Value::Object(Map::new());
    }
    let before = doc.clone();
    overlay_filters(&mut doc, &[], f);
    if path.is_none() && doc == before {
        return Ok(None);
    }
    let cfg: FilterConfig = parse(doc, "filter config")?;
    cfg.validate().map_err(CliError::from)?;
    Ok(Some(cfg))
}

pub fn query_spec(a: &SearchArgs) -> Result<QuerySpec, CliError> {
    let mut doc = load_or_empty(a.config.as_deref())?;
    set_opt(&mut doc, &["title_substring"], &a.title_substring);
    set_opt(&mut doc, &["caption_substring"], &a.caption_substring);
    set_opt(&mut doc, &["min_rows"], &a.min_rows);
    set_opt(&mut doc, &["max_rows"], &a.max_rows);
    set_opt(&mut doc, &["min_cols"], &a.min_cols);
    set_opt(&mut doc, &["max_cols"], &a.max_cols);
    set_opt(&mut doc, &["has_numeric_column"], &a.has_numeric_column);
    set_opt(&mut doc, &["limit"], &a.limit);
    set_opt(&mut doc, &["offset"], &a.offset);
    let q: QuerySpec = parse(doc, "query")?;
    q.validate().map_err(CliError::from)?;
    Ok(q)
}
