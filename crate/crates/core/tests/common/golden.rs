use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, TimeZone, Utc};
use wikitables_core::extract::{extract_tables, ExtractedTable};
use wikitables_core::source::{DumpSource, FetchOutcome, PageSource, SourceConfig};
use wikitables_core::store::{Corpus, TableMetadata};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn extract_all() -> BTreeMap<u64, Vec<ExtractedTable>> {
    let src = DumpSource::open(&SourceConfig::dump(fixtures().join("dump"))).unwrap();
    let mut out = BTreeMap::new();
    for p in src.titles() {
        let p = p.unwrap();
        let FetchOutcome::Page(raw) = src.fetch(&p).unwrap() else {
            panic!("{} missing", p.page_id)
        };
        out.insert(p.page_id, extract_tables(&raw).unwrap().tables);
    }
    out
}

pub fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return out;
    }
    for shard in fs::read_dir(dir).unwrap() {
        let shard = shard.unwrap().path();
        for f in fs::read_dir(&shard).unwrap() {
            let f = f.unwrap().path();
            let rel = f
                .strip_prefix(dir)
                .unwrap()
                .to_string_lossy()
                .replace('\\', "/");
            out.insert(rel, fs::read(&f).unwrap());
        }
    }
    out
}

/// Writes every fixture table with a fixed timestamp; returns the written files
/// next to the checked-in ones.
pub fn render(tmp: &Path) -> (BTreeMap<String, Vec<u8>>, BTreeMap<String, Vec<u8>>) {
    let date = NaiveDate::from_ymd_opt(2021, 9, 13).unwrap();
    let at = Utc.with_ymd_and_hms(2021, 9, 13, 0, 0, 0).unwrap();
    let corpus = Corpus::new(tmp);
    let pages = extract_all();
    assert!(pages.len() >= 15);
    for tables in pages.values() {
        for t in tables {
            corpus
                .write_table(t, &TableMetadata::new(t, date, at))
                .unwrap();
        }
    }
    let actual = files(&corpus.tables_dir());
    let golden_dir = fixtures().join("golden");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let _ = fs::remove_dir_all(&golden_dir);
        for (rel, bytes) in &actual {
            let p = golden_dir.join(rel);
            fs::create_dir_all(p.parent().unwrap()).unwrap();
            fs::write(p, bytes).unwrap();
        }
    }
    (actual, files(&golden_dir))
}

/// Names of files that are missing, unexpected or different.
pub fn differences(
    actual: &BTreeMap<String, Vec<u8>>,
    expected: &BTreeMap<String, Vec<u8>>,
) -> Vec<String> {
    let keys: std::collections::BTreeSet<_> = actual.keys().chain(expected.keys()).collect();
    keys.into_iter()
        .filter(|k| actual.get(*k) != expected.get(*k))
        .cloned()
        .collect()
}
