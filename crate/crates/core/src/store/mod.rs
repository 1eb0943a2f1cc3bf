//! On-disk corpus layout.
//!
//! ```text
//! corpus_root/
//!   manifest.json
//!   titles.tsv          page_id<TAB>title, ascending page_id
//!   checkpoint.log
//!   tables/<NNN>/<page_id>_<offset>.csv
//!   tables/<NNN>/<page_id>_<offset>.json
//!   reports/
//! ```
//!
//! `NNN` is `page_id mod 1000`, zero-padded. A table is committed once its `.json`
//! sidecar exists: the CSV is renamed into place first and the JSON last, so
//! readers that enumerate sidecars never see a half-written table.

mod checkpoint;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::IoContext;
use crate::extract::{CellGrid, ExtractOptions, ExtractedTable, TableId};
use crate::filter::{apply_filters, FilterConfig};
use crate::source::PageRef;
use crate::{Error, Result, TOOLKIT_VERSION};

pub use checkpoint::{load_checkpoint, Checkpoint, CheckpointLog, CheckpointRecord, PageStatus};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.log";
pub const TITLES_FILE: &str = "titles.tsv";
pub const TABLES_DIR: &str = "tables";
pub const REPORTS_DIR: &str = "reports";
pub const FORMAT_VERSION: u32 = 1;
const SHARDS: u64 = 1000;

/// Per-table metadata stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub table_id: TableId,
    pub url: String,
    pub page_title: String,
    pub caption: Option<String>,
    pub context_before: Vec<String>,
    pub context_after: Vec<String>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub column_numeric: Vec<bool>,
    pub header_rows: usize,
    pub extracted_at: DateTime<Utc>,
    pub snapshot_date: NaiveDate,
}

impl TableMetadata {
    pub fn new(
        table: &ExtractedTable,
        snapshot_date: NaiveDate,
        extracted_at: DateTime<Utc>,
    ) -> Self {
        TableMetadata {
            table_id: table.table_id,
            url: table.url.clone(),
            page_title: table.page_title.clone(),
            caption: table.caption.clone(),
            context_before: table.context_before.clone(),
            context_after: table.context_after.clone(),
            n_rows: table.grid.n_rows(),
            n_cols: table.grid.n_cols(),
            column_numeric: table.column_numeric.clone(),
            header_rows: table.header_rows,
            extracted_at,
            snapshot_date,
        }
    }

    /// Caption, else the first header row joined, else "(untitled)".
    pub fn display_title(&self, grid: Option<&CellGrid>) -> String {
        if let Some(c) = &self.caption {
            return c.clone();
        }
        if let Some(g) = grid.filter(|_| self.header_rows > 0) {
            let joined = g.row_texts(0).join(" | ");
            if !joined.trim().is_empty() {
                return joined;
            }
        }
        "(untitled)".to_owned()
    }
}

/// Corpus-level description. Two runs may share a corpus only when their
/// manifests agree on everything but the toolkit version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub toolkit_version: String,
    pub snapshot_date: NaiveDate,
    pub filters: FilterConfig,
    #[serde(default)]
    pub extract: ExtractOptions,
}

impl Manifest {
    pub fn new(snapshot_date: NaiveDate, filters: FilterConfig, extract: ExtractOptions) -> Self {
        Manifest {
            format_version: FORMAT_VERSION,
            toolkit_version: TOOLKIT_VERSION.to_owned(),
            snapshot_date,
            filters,
            extract,
        }
    }

    pub fn mismatch(&self, other: &Manifest) -> Option<String> {
        if self.format_version != other.format_version {
            return Some(format!(
                "format version {} vs {}",
                self.format_version, other.format_version
            ));
        }
        if self.snapshot_date != other.snapshot_date {
            return Some(format!(
                "snapshot date {} vs {}",
                self.snapshot_date, other.snapshot_date
            ));
        }
        if self.filters != other.filters {
            return Some("filter settings differ".into());
        }
        if self.extract != other.extract {
            return Some("extraction settings differ".into());
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
}

/// A table read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTable {
    pub meta: TableMetadata,
    pub grid: CellGrid,
}

impl StoredTable {
    /// Rebuild an [`ExtractedTable`]; header flags come from `header_rows`, span
    /// and padding provenance is not stored and reads back as real cells.
    pub fn to_extracted(&self) -> ExtractedTable {
        ExtractedTable {
            table_id: self.meta.table_id,
            grid: self.grid.clone(),
            header_rows: self.meta.header_rows,
            caption: self.meta.caption.clone(),
            context_before: self.meta.context_before.clone(),
            context_after: self.meta.context_after.clone(),
            page_title: self.meta.page_title.clone(),
            url: self.meta.url.clone(),
            column_numeric: self.meta.column_numeric.clone(),
        }
    }
}

/// A table written to temporary files, not yet visible.
pub struct StagedTable {
    tmp_csv: PathBuf,
    tmp_json: PathBuf,
    paths: StoredPaths,
}

impl StagedTable {
    /// Rename the CSV, then the JSON sidecar, into place.
    pub fn commit(self) -> Result<StoredPaths> {
        fs::rename(&self.tmp_csv, &self.paths.csv)
            .ctx(|| format!("renaming {}", self.tmp_csv.display()))?;
        fs::rename(&self.tmp_json, &self.paths.json)
            .ctx(|| format!("renaming {}", self.tmp_json.display()))?;
        Ok(self.paths)
    }

    /// Rename only the CSV, as a crash between the two renames would leave it.
    #[doc(hidden)]
    pub fn commit_csv_only(self) -> Result<()> {
        fs::rename(&self.tmp_csv, &self.paths.csv)
            .ctx(|| format!("renaming {}", self.tmp_csv.display()))
    }
}

fn tmp_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".tmp");
    PathBuf::from(s)
}

/// Serialize a grid as RFC 4180 CSV (UTF-8, CRLF line ends, quoting when needed).
pub fn grid_to_csv(grid: &CellGrid) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    for row in grid.rows() {
        w.write_record(row.iter().map(|c| c.text.as_str()))
            .map_err(|e| Error::Csv {
                context: "encoding table".into(),
                source: e,
            })?;
    }
    w.into_inner().map_err(|e| Error::Io {
        context: "encoding table".into(),
        source: e.into_error(),
    })
}

pub fn csv_to_texts(bytes: &[u8]) -> Result<Vec<Vec<String>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(bytes);
    r.records()
        .map(|rec| {
            rec.map(|r| r.iter().map(str::to_owned).collect())
                .map_err(|e| Error::Csv {
                    context: "decoding table".into(),
                    source: e,
                })
        })
        .collect()
}

fn write_synced(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut f = File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()
}

/// Write `bytes` to `path` through a temporary file and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    if let Err(e) = write_synced(&tmp, bytes) {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(format!("writing {}", tmp.display()), e));
    }
    fs::rename(&tmp, path).ctx(|| format!("renaming {}", tmp.display()))
}

#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
}

impl Corpus {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Corpus { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.root.join(CHECKPOINT_FILE)
    }

    pub fn titles_path(&self) -> PathBuf {
        self.root.join(TITLES_FILE)
    }

    pub fn tables_dir(&self) -> PathBuf {
        self.root.join(TABLES_DIR)
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join(REPORTS_DIR)
    }

    pub fn shard_dir(&self, page_id: u64) -> PathBuf {
        self.tables_dir().join(format!("{:03}", page_id % SHARDS))
    }

    pub fn table_paths(&self, id: TableId) -> StoredPaths {
        let dir = self.shard_dir(id.page_id);
        StoredPaths {
            csv: dir.join(format!("{id}.csv")),
            json: dir.join(format!("{id}.json")),
        }
    }

    pub fn has_manifest(&self) -> bool {
        self.manifest_path().is_file()
    }

    pub fn read_manifest(&self) -> Result<Manifest> {
        let p = self.manifest_path();
        let bytes = match fs::read(&p) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingManifest(self.root.clone()))
            }
            Err(e) => return Err(Error::io(format!("reading {}", p.display()), e)),
        };
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::json(format!("parsing {}", p.display()), e))
    }

    /// Create the corpus or check that an existing one was built with the same
    /// settings. Nothing is written when the check fails.
    pub fn init(&self, manifest: &Manifest) -> Result<()> {
        if self.has_manifest() {
            let existing = self.read_manifest()?;
            if let Some(reason) = existing.mismatch(manifest) {
                return Err(Error::CorpusMismatch {
                    root: self.root.clone(),
                    reason,
                });
            }
            return Ok(());
        }
        fs::create_dir_all(self.tables_dir())
            .ctx(|| format!("creating {}", self.tables_dir().display()))?;
        let mut json =
            serde_json::to_vec_pretty(manifest).map_err(|e| Error::json("encoding manifest", e))?;
        json.push(b'\n');
        write_atomic(&self.manifest_path(), &json)
    }

    /// Write both files of a table to temporary names.
    pub fn stage_table(&self, table: &ExtractedTable, meta: &TableMetadata) -> Result<StagedTable> {
        debug_assert_eq!(table.table_id, meta.table_id);
        let paths = self.table_paths(meta.table_id);
        if paths.csv.exists() || paths.json.exists() {
            return Err(Error::DuplicateTable {
                page_id: meta.table_id.page_id,
                offset: meta.table_id.offset,
            });
        }
        let dir = self.shard_dir(meta.table_id.page_id);
        fs::create_dir_all(&dir).ctx(|| format!("creating {}", dir.display()))?;

        let csv = grid_to_csv(&table.grid)?;
        let mut json =
            serde_json::to_vec_pretty(meta).map_err(|e| Error::json("encoding metadata", e))?;
        json.push(b'\n');

        let staged = StagedTable {
            tmp_csv: tmp_path(&paths.csv),
            tmp_json: tmp_path(&paths.json),
            paths,
        };
        for (tmp, bytes) in [(&staged.tmp_csv, &csv), (&staged.tmp_json, &json)] {
            if let Err(e) = write_synced(tmp, bytes) {
                let _ = fs::remove_file(&staged.tmp_csv);
                let _ = fs::remove_file(&staged.tmp_json);
                return Err(Error::io(format!("writing {}", tmp.display()), e));
            }
        }
        Ok(staged)
    }

    pub fn write_table(&self, table: &ExtractedTable, meta: &TableMetadata) -> Result<StoredPaths> {
        self.stage_table(table, meta)?.commit()
    }

    /// Remove every file (committed or temporary) belonging to `page_id`. Used
    /// before re-processing a page whose checkpoint record never made it to disk.
    pub fn purge_page(&self, page_id: u64) -> Result<usize> {
        let dir = self.shard_dir(page_id);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
            Err(e) => return Err(Error::io(format!("listing {}", dir.display()), e)),
        };
        let prefix = format!("{page_id}_");
        let mut removed = 0;
        for entry in entries {
            let entry = entry.ctx(|| format!("listing {}", dir.display()))?;
            let name = entry.file_name();
            if name.to_string_lossy().starts_with(&prefix) {
                fs::remove_file(entry.path())
                    .ctx(|| format!("removing {}", entry.path().display()))?;
                removed += 1;
            }
        }
        Ok(removed)
    }

    pub fn read_metadata(&self, id: TableId) -> Result<TableMetadata> {
        read_json(&self.table_paths(id).json)
    }

    pub fn read_table(&self, id: TableId) -> Result<StoredTable> {
        let meta = self.read_metadata(id)?;
        let csv = self.table_paths(id).csv;
        let bytes = fs::read(&csv).ctx(|| format!("reading {}", csv.display()))?;
        let texts = csv_to_texts(&bytes)?;
        let grid = CellGrid::from_texts(texts, meta.header_rows)
            .map_err(|e| Error::Config(format!("{}: {e}", csv.display())))?;
        if grid.n_rows() != meta.n_rows || grid.n_cols() != meta.n_cols {
            return Err(Error::Config(format!(
                "{}: grid is {}x{} but metadata says {}x{}",
                csv.display(),
                grid.n_rows(),
                grid.n_cols(),
                meta.n_rows,
                meta.n_cols
            )));
        }
        Ok(StoredTable { meta, grid })
    }

    /// Shard directories in name order.
    pub fn shard_dirs(&self) -> Result<Vec<PathBuf>> {
        let dir = self.tables_dir();
        let mut out = Vec::new();
        match fs::read_dir(&dir) {
            Ok(entries) => {
                for e in entries {
                    let e = e.ctx(|| format!("listing {}", dir.display()))?;
                    if e.path().is_dir() {
                        out.push(e.path());
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(format!("listing {}", dir.display()), e)),
        }
        out.sort();
        Ok(out)
    }

    /// Committed table ids in one shard, sorted.
    pub fn shard_table_ids(shard: &Path) -> Result<Vec<TableId>> {
        let mut ids = Vec::new();
        for e in fs::read_dir(shard).ctx(|| format!("listing {}", shard.display()))? {
            let e = e.ctx(|| format!("listing {}", shard.display()))?;
            let name = e.file_name();
            let name = name.to_string_lossy();
            if let Some(id) = name.strip_suffix(".json").and_then(parse_table_stem) {
                ids.push(id);
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// All committed table ids, sorted.
    pub fn table_ids(&self) -> Result<Vec<TableId>> {
        let mut ids = Vec::new();
        for shard in self.shard_dirs()? {
            ids.extend(Self::shard_table_ids(&shard)?);
        }
        ids.sort();
        Ok(ids)
    }

    pub fn write_titles(&self, titles: &[PageRef]) -> Result<()> {
        let mut buf = Vec::new();
        for p in titles {
            writeln!(buf, "{}\t{}", p.page_id, p.title).expect("write to vec");
        }
        fs::create_dir_all(&self.root).ctx(|| format!("creating {}", self.root.display()))?;
        write_atomic(&self.titles_path(), &buf)
    }

    /// The persisted listing, or `None` when the corpus has none yet.
    pub fn read_titles(&self) -> Result<Option<Vec<PageRef>>> {
        let p = self.titles_path();
        let f = match File::open(&p) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(format!("opening {}", p.display()), e)),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.ctx(|| format!("reading {}", p.display()))?;
            let parsed = line
                .split_once('\t')
                .and_then(|(id, t)| Some(PageRef::new(id.parse().ok()?, t)));
            match parsed {
                Some(r) => out.push(r),
                None => {
                    return Err(Error::Config(format!(
                        "{} line {}: expected page_id<TAB>title",
                        p.display(),
                        i + 1
                    )))
                }
            }
        }
        Ok(Some(out))
    }

    pub fn load_checkpoint(&self, expected: Option<NaiveDate>) -> Result<Checkpoint> {
        load_checkpoint(&self.checkpoint_path(), expected)
    }
}

fn parse_table_stem(stem: &str) -> Option<TableId> {
    let (p, o) = stem.split_once('_')?;
    Some(TableId::new(p.parse().ok()?, o.parse().ok()?))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).ctx(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::json(format!("parsing {}", path.display()), e))
}

/// Summary of an offline re-filtering run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RefilterSummary {
    pub tables_in: usize,
    pub tables_out: usize,
}

/// Derive a filtered corpus at `dst` from the stored corpus at `src`.
///
/// The source is left untouched. Its listing is copied, tables are passed through
/// `cfg`, and the destination checkpoint lists every page of the source with the
/// new table counts.
pub fn refilter_corpus(src: &Corpus, dst: &Corpus, cfg: &FilterConfig) -> Result<RefilterSummary> {
    cfg.validate()?;
    let manifest = src.read_manifest()?;
    if dst.has_manifest() {
        return Err(Error::Config(format!(
            "{} already holds a corpus",
            dst.root().display()
        )));
    }
    dst.init(&Manifest::new(
        manifest.snapshot_date,
        cfg.clone(),
        manifest.extract.clone(),
    ))?;
    if let Some(titles) = src.read_titles()? {
        dst.write_titles(&titles)?;
    }

    let mut summary = RefilterSummary::default();
    let mut kept: std::collections::BTreeMap<u64, u32> = Default::default();
    for id in src.table_ids()? {
        let stored = src.read_table(id)?;
        summary.tables_in += 1;
        if let Some(t) = apply_filters(&stored.to_extracted(), cfg) {
            let meta = TableMetadata {
                n_rows: t.grid.n_rows(),
                n_cols: t.grid.n_cols(),
                column_numeric: t.column_numeric.clone(),
                header_rows: t.header_rows,
                ..stored.meta.clone()
            };
            dst.write_table(&t, &meta)?;
            *kept.entry(id.page_id).or_default() += 1;
            summary.tables_out += 1;
        }
    }

    let cp = src.load_checkpoint(Some(manifest.snapshot_date))?;
    let (mut log, _) = CheckpointLog::open(&dst.checkpoint_path(), manifest.snapshot_date)?;
    for rec in cp.records.values() {
        log.append(CheckpointRecord {
            table_count: kept.get(&rec.page_id).copied().unwrap_or(0),
            ..*rec
        })?;
    }
    Ok(summary)
}
