//! Corpus statistics, rankings and offline metadata search.
//!
//! Everything here reads the stored corpus only. Cell-level definitions come from
//! [`crate::filter`].

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::IoContext;
use crate::extract::TableId;
use crate::filter::{
    apply_filters, classify_chars, is_cyrillic_only_column, is_latin_only_column, is_mostly_null,
    is_numeric_column, FilterConfig, DEFAULT_NULL_THRESHOLD,
};
use crate::store::{read_json, write_atomic, Corpus, StoredTable, TableMetadata};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub pages_total: u64,
    pub tables_total: u64,
    pub rows_total: u64,
    pub columns_total: u64,
    pub cells_total: u64,
    pub avg_cells_per_table: f64,
    pub avg_tables_per_page: f64,
    pub avg_cells_per_row: f64,
    pub avg_cells_per_column: f64,
    pub avg_chars_per_cell: f64,
    pub avg_cyrillic_per_cell: f64,
    pub avg_latin_per_cell: f64,
    pub pct_nonstring_cells: f64,
    pub pct_mostly_null_rows: f64,
    pub pct_mostly_null_columns: f64,
    pub pct_cyrillic_only_columns: f64,
    pub pct_latin_only_columns: f64,
    pub pct_numeric_only_columns: f64,
    /// No tables were counted; every average above is reported as 0.
    pub empty: bool,
    /// Tables that could not be read and were left out.
    pub unreadable_tables: u64,
}

/// Raw counters behind [`CorpusStats`]. Merging is commutative and associative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    tables: u64,
    rows: u64,
    cols: u64,
    cells: u64,
    chars: u64,
    cyrillic: u64,
    latin: u64,
    nonstring_cells: u64,
    null_rows: u64,
    null_cols: u64,
    cyrillic_cols: u64,
    latin_cols: u64,
    numeric_cols: u64,
    unreadable: u64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.tables += o.tables;
        self.rows += o.rows;
        self.cols += o.cols;
        self.cells += o.cells;
        self.chars += o.chars;
        self.cyrillic += o.cyrillic;
        self.latin += o.latin;
        self.nonstring_cells += o.nonstring_cells;
        self.null_rows += o.null_rows;
        self.null_cols += o.null_cols;
        self.cyrillic_cols += o.cyrillic_cols;
        self.latin_cols += o.latin_cols;
        self.numeric_cols += o.numeric_cols;
        self.unreadable += o.unreadable;
        self
    }

    fn add_table(&mut self, t: &StoredTable, null_threshold: f64) {
        let g = &t.grid;
        let header_rows = t.meta.header_rows.min(g.n_rows());
        self.tables += 1;
        self.rows += g.n_rows() as u64;
        self.cols += g.n_cols() as u64;
        self.cells += g.n_cells() as u64;
        for cell in g.cells() {
            let p = classify_chars(&cell.text);
            self.chars += p.total;
            self.cyrillic += p.cyrillic;
            self.latin += p.latin;
            self.nonstring_cells += u64::from(p.is_nonstring());
        }
        for r in 0..g.n_rows() {
            let row = g.row_texts(r);
            self.null_rows += u64::from(is_mostly_null(row.iter().copied(), null_threshold));
        }
        for c in 0..g.n_cols() {
            let col = || g.data_column(c, header_rows);
            self.null_cols += u64::from(is_mostly_null(col(), null_threshold));
            self.cyrillic_cols += u64::from(is_cyrillic_only_column(col()));
            self.latin_cols += u64::from(is_latin_only_column(col()));
            self.numeric_cols += u64::from(is_numeric_column(col()));
        }
    }

    fn finish(&self, pages_total: u64) -> CorpusStats {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let pct = |a: u64, b: u64| {
            if b == 0 {
                0.0
            } else {
                100.0 * a as f64 / b as f64
            }
        };
        CorpusStats {
            pages_total,
            tables_total: self.tables,
            rows_total: self.rows,
            columns_total: self.cols,
            cells_total: self.cells,
            avg_cells_per_table: ratio(self.cells, self.tables),
            avg_tables_per_page: ratio(self.tables, pages_total),
            avg_cells_per_row: ratio(self.cells, self.rows),
            avg_cells_per_column: ratio(self.cells, self.cols),
            avg_chars_per_cell: ratio(self.chars, self.cells),
            avg_cyrillic_per_cell: ratio(self.cyrillic, self.cells),
            avg_latin_per_cell: ratio(self.latin, self.cells),
            pct_nonstring_cells: pct(self.nonstring_cells, self.cells),
            pct_mostly_null_rows: pct(self.null_rows, self.rows),
            pct_mostly_null_columns: pct(self.null_cols, self.cols),
            pct_cyrillic_only_columns: pct(self.cyrillic_cols, self.cols),
            pct_latin_only_columns: pct(self.latin_cols, self.cols),
            pct_numeric_only_columns: pct(self.numeric_cols, self.cols),
            empty: self.tables == 0,
            unreadable_tables: self.unreadable,
        }
    }
}

fn open_corpus(root: &Path) -> Result<Corpus> {
    let corpus = Corpus::new(root);
    if !corpus.has_manifest() {
        return Err(Error::MissingManifest(corpus.manifest_path()));
    }
    Ok(corpus)
}

/// Visit every readable table, shards in parallel, and fold the results.
fn scan<T, F, M>(
    corpus: &Corpus,
    init: impl Fn() -> T + Sync + Send,
    fold: F,
    merge: M,
) -> Result<(T, u64)>
where
    T: Send,
    F: Fn(T, StoredTable) -> T + Sync + Send,
    M: Fn(T, T) -> T + Sync + Send,
{
    let shards = corpus.shard_dirs()?;
    shards
        .par_iter()
        .map(|shard| -> Result<(T, u64)> {
            let mut acc = init();
            let mut bad = 0;
            for id in Corpus::shard_table_ids(shard)? {
                match corpus.read_table(id) {
                    Ok(t) => acc = fold(acc, t),
                    Err(e) => {
                        log::warn!("skipping table {id}: {e}");
                        bad += 1;
                    }
                }
            }
            Ok((acc, bad))
        })
        .try_reduce(|| (init(), 0), |(a, x), (b, y)| Ok((merge(a, b), x + y)))
}

/// Pages of the persisted listing, or the distinct pages holding tables when the
/// corpus has no listing.
fn pages_total(corpus: &Corpus) -> Result<u64> {
    if let Some(titles) = corpus.read_titles()? {
        return Ok(titles.len() as u64);
    }
    let mut ids: Vec<u64> = corpus.table_ids()?.into_iter().map(|t| t.page_id).collect();
    ids.dedup();
    Ok(ids.len() as u64)
}

/// Corpus statistics, optionally over the corpus as seen through `cfg`.
pub fn compute_stats(root: &Path, cfg: Option<&FilterConfig>) -> Result<CorpusStats> {
    let corpus = open_corpus(root)?;
    if let Some(c) = cfg {
        c.validate()?;
    }
    let threshold = cfg.map_or(DEFAULT_NULL_THRESHOLD, |c| c.null_threshold);
    let filter = cfg.filter(|c| !c.is_identity());
    let (mut tally, bad) = scan(
        &corpus,
        Tally::default,
        |mut acc, t| {
            match filter {
                None => acc.add_table(&t, threshold),
                Some(f) => {
                    if let Some(ft) = apply_filters(&t.to_extracted(), f) {
                        let meta = TableMetadata {
                            header_rows: ft.header_rows,
                            n_rows: ft.grid.n_rows(),
                            n_cols: ft.grid.n_cols(),
                            ..t.meta
                        };
                        acc.add_table(
                            &StoredTable {
                                meta,
                                grid: ft.grid,
                            },
                            threshold,
                        );
                    }
                }
            }
            acc
        },
        Tally::merge,
    )?;
    tally.unreadable = bad;
    Ok(tally.finish(pages_total(&corpus)?))
}

/// Metadata of every table, sorted by id. Unreadable sidecars are skipped.
fn all_metadata(corpus: &Corpus) -> Result<Vec<TableMetadata>> {
    let shards = corpus.shard_dirs()?;
    let per_shard: Vec<Vec<TableMetadata>> = shards
        .par_iter()
        .map(|shard| -> Result<Vec<TableMetadata>> {
            let mut out = Vec::new();
            for id in Corpus::shard_table_ids(shard)? {
                match corpus.read_metadata(id) {
                    Ok(m) => out.push(m),
                    Err(e) => log::warn!("skipping table {id}: {e}"),
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut all: Vec<TableMetadata> = per_shard.into_iter().flatten().collect();
    all.sort_by_key(|m| m.table_id);
    Ok(all)
}

/// `n_cols x n_rows` key used by the size histogram.
pub fn size_key(n_cols: usize, n_rows: usize) -> String {
    format!("{n_cols}x{n_rows}")
}

/// Sort by count descending, then key ascending, and keep `top_n`.
fn rank<K: Ord>(counts: impl IntoIterator<Item = (K, u64)>, top_n: usize) -> Vec<(K, u64)> {
    let mut v: Vec<(K, u64)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(top_n);
    v
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SizeDistribution {
    /// `(size key, tables)`, most frequent first.
    pub top: Vec<(String, u64)>,
    /// Row count → tables.
    pub rows: BTreeMap<usize, u64>,
    /// Column count → tables.
    pub cols: BTreeMap<usize, u64>,
}

pub fn size_histogram(root: &Path, top_n: usize) -> Result<SizeDistribution> {
    let corpus = open_corpus(root)?;
    let mut sizes: HashMap<(usize, usize), u64> = HashMap::new();
    let mut out = SizeDistribution::default();
    for m in all_metadata(&corpus)? {
        *sizes.entry((m.n_cols, m.n_rows)).or_default() += 1;
        *out.rows.entry(m.n_rows).or_default() += 1;
        *out.cols.entry(m.n_cols).or_default() += 1;
    }
    // rank on the rendered key so ties order lexicographically
    out.top = rank(
        sizes.into_iter().map(|((c, r), n)| (size_key(c, r), n)),
        top_n,
    );
    Ok(out)
}

fn is_trivial_header(text: &str) -> bool {
    !text.is_empty() && text.chars().all(|c| c.is_ascii_digit())
}

/// Most frequent header-cell texts over all header rows. Empty header cells are
/// not counted; with `filter_trivial`, pure digit strings are not counted either.
pub fn header_frequency(
    root: &Path,
    top_n: usize,
    filter_trivial: bool,
) -> Result<Vec<(String, u64)>> {
    let corpus = open_corpus(root)?;
    let (counts, _) = scan(
        &corpus,
        HashMap::<String, u64>::new,
        |mut acc, t| {
            for r in 0..t.meta.header_rows.min(t.grid.n_rows()) {
                for text in t.grid.row_texts(r) {
                    let text = text.trim();
                    if text.is_empty() || (filter_trivial && is_trivial_header(text)) {
                        continue;
                    }
                    *acc.entry(text.to_owned()).or_default() += 1;
                }
            }
            acc
        },
        |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        },
    )?;
    Ok(rank(counts, top_n))
}

/// Pages by number of tables with at least `min_rows` rows and `min_cols` columns.
pub fn table_rich_pages(
    root: &Path,
    top_n: usize,
    min_rows: usize,
    min_cols: usize,
) -> Result<Vec<(String, u64)>> {
    let corpus = open_corpus(root)?;
    let mut per_page: BTreeMap<u64, (String, u64)> = BTreeMap::new();
    for m in all_metadata(&corpus)? {
        if m.n_rows >= min_rows && m.n_cols >= min_cols {
            per_page
                .entry(m.table_id.page_id)
                .or_insert_with(|| (m.page_title.clone(), 0))
                .1 += 1;
        }
    }
    Ok(rank(per_page.into_values(), top_n))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Superlative {
    pub table_id: TableId,
    pub page_title: String,
    pub value: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Superlatives {
    /// Most columns.
    pub widest: Option<Superlative>,
    /// Most rows.
    pub longest: Option<Superlative>,
    /// Most characters over all cells.
    pub most_characters: Option<Superlative>,
    /// Most cells.
    pub most_cells: Option<Superlative>,
}

fn better(cur: Option<Superlative>, cand: Superlative) -> Option<Superlative> {
    match cur {
        Some(c)
            if (c.value, std::cmp::Reverse(c.table_id))
                >= (cand.value, std::cmp::Reverse(cand.table_id)) =>
        {
            Some(c)
        }
        _ => Some(cand),
    }
}

impl Superlatives {
    fn merge(self, o: Superlatives) -> Superlatives {
        let pick = |a: Option<Superlative>, b: Option<Superlative>| match b {
            Some(b) => better(a, b),
            None => a,
        };
        Superlatives {
            widest: pick(self.widest, o.widest),
            longest: pick(self.longest, o.longest),
            most_characters: pick(self.most_characters, o.most_characters),
            most_cells: pick(self.most_cells, o.most_cells),
        }
    }
}

/// Record tables: ties go to the smallest table id.
pub fn superlatives(root: &Path) -> Result<Superlatives> {
    let corpus = open_corpus(root)?;
    let (s, _) = scan(
        &corpus,
        Superlatives::default,
        |acc, t| {
            let make = |value: u64| Superlative {
                table_id: t.meta.table_id,
                page_title: t.meta.page_title.clone(),
                value,
            };
            let chars: u64 = t.grid.cells().map(|c| c.text.chars().count() as u64).sum();
            Superlatives {
                widest: better(acc.widest, make(t.grid.n_cols() as u64)),
                longest: better(acc.longest, make(t.grid.n_rows() as u64)),
                most_characters: better(acc.most_characters, make(chars)),
                most_cells: better(acc.most_cells, make(t.grid.n_cells() as u64)),
            }
        },
        Superlatives::merge,
    )?;
    Ok(s)
}

fn default_limit() -> usize {
    50
}

/// Conjunctive metadata query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuerySpec {
    pub title_substring: Option<String>,
    pub caption_substring: Option<String>,
    pub min_rows: Option<usize>,
    pub max_rows: Option<usize>,
    pub min_cols: Option<usize>,
    pub max_cols: Option<usize>,
    pub has_numeric_column: Option<bool>,
    pub limit: usize,
    pub offset: usize,
}

impl Default for QuerySpec {
    fn default() -> Self {
        QuerySpec {
            title_substring: None,
            caption_substring: None,
            min_rows: None,
            max_rows: None,
            min_cols: None,
            max_cols: None,
            has_numeric_column: None,
            limit: default_limit(),
            offset: 0,
        }
    }
}

/// Case-insensitive comparison form: NFC, then lowercase.
pub fn fold_text(s: &str) -> String {
    s.nfc().collect::<String>().to_lowercase()
}

impl QuerySpec {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.limit == 0 {
            out.push("limit must be at least 1".into());
        }
        if let (Some(lo), Some(hi)) = (self.min_rows, self.max_rows) {
            if lo > hi {
                out.push(format!("min_rows {lo} exceeds max_rows {hi}"));
            }
        }
        if let (Some(lo), Some(hi)) = (self.min_cols, self.max_cols) {
            if lo > hi {
                out.push(format!("min_cols {lo} exceeds max_cols {hi}"));
            }
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

    /// Predicate over one table's metadata.
    pub fn matches(&self, m: &TableMetadata) -> bool {
        let contains = |hay: &str, needle: &Option<String>| match needle {
            None => true,
            Some(n) => fold_text(hay).contains(&fold_text(n)),
        };
        contains(&m.page_title, &self.title_substring)
            && match &self.caption_substring {
                None => true,
                Some(_) => m
                    .caption
                    .as_deref()
                    .is_some_and(|c| contains(c, &self.caption_substring)),
            }
            && self.min_rows.is_none_or(|v| m.n_rows >= v)
            && self.max_rows.is_none_or(|v| m.n_rows <= v)
            && self.min_cols.is_none_or(|v| m.n_cols >= v)
            && self.max_cols.is_none_or(|v| m.n_cols <= v)
            && self
                .has_numeric_column
                .is_none_or(|want| m.column_numeric.iter().any(|&b| b) == want)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPage {
    /// Matches before paging.
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub tables: Vec<TableMetadata>,
}

/// Metadata search, ordered by table id. Reads sidecars only.
pub fn search(root: &Path, q: &QuerySpec) -> Result<SearchPage> {
    q.validate()?;
    let corpus = open_corpus(root)?;
    let hits: Vec<TableMetadata> = all_metadata(&corpus)?
        .into_iter()
        .filter(|m| q.matches(m))
        .collect();
    Ok(SearchPage {
        total: hits.len(),
        offset: q.offset,
        limit: q.limit,
        tables: hits.into_iter().skip(q.offset).take(q.limit).collect(),
    })
}

/// Human-readable table of [`CorpusStats`]: shares as whole percents, averages
/// with two decimals.
pub fn render_stats(s: &CorpusStats) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k:<46} {v:>12}");
    };
    line("Total number of pages", s.pages_total.to_string());
    line("Total number of tables", s.tables_total.to_string());
    line("Total number of rows", s.rows_total.to_string());
    line("Total number of columns", s.columns_total.to_string());
    line("Total number of cells", s.cells_total.to_string());
    line(
        "Avg number of cells per table",
        format!("{:.2}", s.avg_cells_per_table),
    );
    line(
        "Avg number of tables per page",
        format!("{:.2}", s.avg_tables_per_page),
    );
    line(
        "Avg number of cells per row",
        format!("{:.2}", s.avg_cells_per_row),
    );
    line(
        "Avg number of cells per column",
        format!("{:.2}", s.avg_cells_per_column),
    );
    line(
        "Avg number of characters per cell",
        format!("{:.2}", s.avg_chars_per_cell),
    );
    line(
        "Avg number of Cyrillic characters per cell",
        format!("{:.2}", s.avg_cyrillic_per_cell),
    );
    line(
        "Avg number of Latin characters per cell",
        format!("{:.2}", s.avg_latin_per_cell),
    );
    line(
        "Percentage of cells with non-string data",
        format!("{:.0}%", s.pct_nonstring_cells),
    );
    line(
        "Percentage of rows that are mostly NULL",
        format!("{:.0}%", s.pct_mostly_null_rows),
    );
    line(
        "Percentage of columns that are mostly NULL",
        format!("{:.0}%", s.pct_mostly_null_columns),
    );
    line(
        "Percentage of Cyrillic-only columns",
        format!("{:.0}%", s.pct_cyrillic_only_columns),
    );
    line(
        "Percentage of Latin-only columns",
        format!("{:.0}%", s.pct_latin_only_columns),
    );
    line(
        "Percentage of numeric-only columns",
        format!("{:.0}%", s.pct_numeric_only_columns),
    );
    if s.unreadable_tables > 0 {
        line(
            "Unreadable tables (excluded)",
            s.unreadable_tables.to_string(),
        );
    }
    out
}

fn tsv<K: std::fmt::Display>(header: &str, rows: impl IntoIterator<Item = (K, u64)>) -> Vec<u8> {
    let mut s = format!("{header}\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k}\t{v}");
    }
    s.into_bytes()
}

/// Settings for [`write_reports`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportOptions {
    pub top_n: usize,
    pub rich_min_rows: usize,
    pub rich_min_cols: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            top_n: 10,
            rich_min_rows: 3,
            rich_min_cols: 5,
        }
    }
}

/// Everything [`write_reports`] produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reports {
    pub stats: CorpusStats,
    pub sizes: SizeDistribution,
    pub headers: Vec<(String, u64)>,
    pub headers_nontrivial: Vec<(String, u64)>,
    pub rich_pages: Vec<(String, u64)>,
    pub rich_pages_filtered: Vec<(String, u64)>,
    pub superlatives: Superlatives,
}

/// Compute statistics and rankings and write them under `reports/`.
pub fn write_reports(root: &Path, opts: &ReportOptions) -> Result<Reports> {
    let corpus = open_corpus(root)?;
    let r = Reports {
        stats: compute_stats(root, None)?,
        sizes: size_histogram(root, opts.top_n)?,
        headers: header_frequency(root, opts.top_n, false)?,
        headers_nontrivial: header_frequency(root, opts.top_n, true)?,
        rich_pages: table_rich_pages(root, opts.top_n, 0, 0)?,
        rich_pages_filtered: table_rich_pages(
            root,
            opts.top_n,
            opts.rich_min_rows,
            opts.rich_min_cols,
        )?,
        superlatives: superlatives(root)?,
    };
    let dir = corpus.reports_dir();
    fs::create_dir_all(&dir).ctx(|| format!("creating {}", dir.display()))?;
    let files: Vec<(&str, Vec<u8>)> = vec![
        ("stats.json", pretty(&r.stats)?),
        ("stats.txt", render_stats(&r.stats).into_bytes()),
        (
            "sizes.tsv",
            tsv("size\ttables", r.sizes.top.iter().map(|(k, v)| (k, *v))),
        ),
        (
            "rows_distribution.tsv",
            tsv("rows\ttables", r.sizes.rows.iter().map(|(k, v)| (k, *v))),
        ),
        (
            "columns_distribution.tsv",
            tsv("columns\ttables", r.sizes.cols.iter().map(|(k, v)| (k, *v))),
        ),
        (
            "headers.tsv",
            tsv("header\tfrequency", r.headers.iter().map(|(k, v)| (k, *v))),
        ),
        (
            "headers_nontrivial.tsv",
            tsv(
                "header\tfrequency",
                r.headers_nontrivial.iter().map(|(k, v)| (k, *v)),
            ),
        ),
        (
            "rich_pages.tsv",
            tsv("page\ttables", r.rich_pages.iter().map(|(k, v)| (k, *v))),
        ),
        (
            "rich_pages_filtered.tsv",
            tsv(
                "page\ttables",
                r.rich_pages_filtered.iter().map(|(k, v)| (k, *v)),
            ),
        ),
        ("superlatives.json", pretty(&r.superlatives)?),
    ];
    for (name, bytes) in files {
        write_atomic(&dir.join(name), &bytes)?;
    }
    Ok(r)
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| Error::json("encoding report", e))?;
    out.push(b'\n');
    Ok(out)
}

/// Stored statistics report, if one was written.
pub fn read_stats_report(root: &Path) -> Result<Option<CorpusStats>> {
    let p = Corpus::new(root).reports_dir().join("stats.json");
    if !p.exists() {
        return Ok(None);
    }
    read_json(&p).map(Some)
}
