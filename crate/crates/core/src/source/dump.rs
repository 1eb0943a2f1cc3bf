//! Offline HTML dumps.
//!
//! A dump is a directory holding `manifest.tsv` and one rendered-HTML file per page.
//! Each manifest line is `page_id<TAB>title<TAB>relative/path.html` and ends with a
//! newline; a final line without one marks a truncated dump.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Component, Path, PathBuf};

use super::{FetchOutcome, PageRef, PageSource, RawPage, SourceConfig, SourceError};

pub const MANIFEST_FILE: &str = "manifest.tsv";

const WIKITEXT_EXTENSIONS: [&str; 4] = ["wikitext", "wiki", "mediawiki", "xml"];

struct Entry {
    page: PageRef,
    path: PathBuf,
    offset: u64,
}

fn manifest_path(dump: &Path) -> PathBuf {
    if dump.is_dir() {
        dump.join(MANIFEST_FILE)
    } else {
        dump.to_path_buf()
    }
}

fn parse_line(line: &str, offset: u64) -> Result<(PageRef, PathBuf), SourceError> {
    let corrupt = |message: String| SourceError::CorruptDump { offset, message };
    let mut fields = line.split('\t');
    let (Some(id), Some(title), Some(rel), None) =
        (fields.next(), fields.next(), fields.next(), fields.next())
    else {
        return Err(corrupt("expected 3 tab-separated fields".into()));
    };
    let page_id: u64 = id
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| corrupt(format!("bad page id {id:?}")))?;
    if title.is_empty() {
        return Err(corrupt("empty title".into()));
    }
    let rel = PathBuf::from(rel);
    if rel.as_os_str().is_empty() || rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(corrupt(format!("page path {rel:?} must be relative")));
    }
    if let Some(ext) = rel.extension().and_then(|e| e.to_str()) {
        if WIKITEXT_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()) {
            return Err(SourceError::UnsupportedDump(format!(
                "{rel:?} looks like wikitext/XML; only rendered HTML dumps are supported"
            )));
        }
    }
    Ok((PageRef::new(page_id, title), rel))
}

fn read_html(path: &Path, offset: u64) -> Result<String, SourceError> {
    let html = std::fs::read_to_string(path).map_err(|e| SourceError::CorruptDump {
        offset,
        message: format!("{}: {e}", path.display()),
    })?;
    if html.trim_start().starts_with("<mediawiki") {
        return Err(SourceError::UnsupportedDump(format!(
            "{} is a MediaWiki XML export; only rendered HTML dumps are supported",
            path.display()
        )));
    }
    Ok(html)
}

/// Streaming reader over a dump, one page at a time in manifest order.
pub struct DumpReader {
    cfg: SourceConfig,
    root: PathBuf,
    manifest: BufReader<File>,
    offset: u64,
    line: Vec<u8>,
    done: bool,
}

/// Open the dump named by `cfg.dump_path` for streaming.
pub fn read_dump(cfg: &SourceConfig) -> Result<DumpReader, SourceError> {
    let path = cfg
        .dump_path
        .as_deref()
        .ok_or_else(|| SourceError::UnsupportedDump("no dump_path configured".into()))?;
    let manifest = manifest_path(path);
    let file = File::open(&manifest).map_err(|e| SourceError::CorruptDump {
        offset: 0,
        message: format!("{}: {e}", manifest.display()),
    })?;
    Ok(DumpReader {
        cfg: cfg.clone(),
        root: manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
        manifest: BufReader::new(file),
        offset: 0,
        line: Vec::new(),
        done: false,
    })
}

impl DumpReader {
    fn next_entry(&mut self) -> Option<Result<Entry, SourceError>> {
        if self.done {
            return None;
        }
        loop {
            self.line.clear();
            let start = self.offset;
            let n = match self.manifest.read_until(b'\n', &mut self.line) {
                Ok(n) => n,
                Err(e) => {
                    self.done = true;
                    return Some(Err(SourceError::CorruptDump {
                        offset: start,
                        message: e.to_string(),
                    }));
                }
            };
            self.offset += n as u64;
            if n == 0 {
                self.done = true;
                return None;
            }
            if self.line.last() != Some(&b'\n') {
                self.done = true;
                return Some(Err(SourceError::TruncatedDump { offset: start }));
            }
            let text = match std::str::from_utf8(&self.line) {
                Ok(t) => t.trim_end_matches(['\n', '\r']),
                Err(e) => {
                    self.done = true;
                    return Some(Err(SourceError::CorruptDump {
                        offset: start,
                        message: e.to_string(),
                    }));
                }
            };
            if text.is_empty() {
                continue;
            }
            let r = parse_line(text, start).map(|(page, rel)| Entry {
                page,
                path: self.root.join(rel),
                offset: start,
            });
            if r.is_err() {
                self.done = true;
            }
            return Some(r);
        }
    }
}

impl Iterator for DumpReader {
    type Item = Result<RawPage, SourceError>;

    fn next(&mut self) -> Option<Self::Item> {
        let entry = match self.next_entry()? {
            Ok(e) => e,
            Err(e) => return Some(Err(e)),
        };
        let r = read_html(&entry.path, entry.offset).map(|html| {
            let url = self.cfg.page_url(&entry.page.title);
            RawPage::from_dump(entry.page, html, url)
        });
        if r.is_err() {
            self.done = true;
        }
        Some(r)
    }
}

/// Random-access view of a dump for the crawl pipeline. Keeps the manifest index in
/// memory; page bodies are read on demand.
pub struct DumpSource {
    cfg: SourceConfig,
    order: Vec<PageRef>,
    index: HashMap<u64, (PathBuf, u64)>,
}

impl DumpSource {
    pub fn open(cfg: &SourceConfig) -> Result<Self, SourceError> {
        let mut reader = read_dump(cfg)?;
        let mut order = Vec::new();
        let mut index = HashMap::new();
        while let Some(entry) = reader.next_entry() {
            let e = entry?;
            if index.insert(e.page.page_id, (e.path, e.offset)).is_some() {
                return Err(SourceError::CorruptDump {
                    offset: e.offset,
                    message: format!("page id {} listed twice", e.page.page_id),
                });
            }
            order.push(e.page);
        }
        Ok(DumpSource {
            cfg: cfg.clone(),
            order,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

impl PageSource for DumpSource {
    fn titles(&self) -> Box<dyn Iterator<Item = Result<PageRef, SourceError>> + Send + '_> {
        Box::new(self.order.iter().cloned().map(Ok))
    }

    fn fetch(&self, page: &PageRef) -> Result<FetchOutcome, SourceError> {
        let Some((path, offset)) = self.index.get(&page.page_id) else {
            return Ok(FetchOutcome::Missing);
        };
        if !path.exists() {
            return Ok(FetchOutcome::Missing);
        }
        let html = read_html(path, *offset)?;
        Ok(FetchOutcome::Page(RawPage::from_dump(
            page.clone(),
            html,
            self.cfg.page_url(&page.title),
        )))
    }
}
