//! Random corpora for oracle tests.
#![allow(dead_code)]

use std::path::Path;

use chrono::{TimeZone, Utc};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use wikitables_core::extract::{Cell, CellGrid, ExtractedTable, TableId};
use wikitables_core::filter::{column_numeric_flags, FilterConfig};
use wikitables_core::source::PageRef;
use wikitables_core::store::{Corpus, Manifest, TableMetadata};

use super::date;
use super::oracle::PlainTable;

pub const CELL_POOL: &[&str] = &[
    "",
    "",
    "-",
    "—",
    "–",
    "n/a",
    "N/A",
    "12",
    "1 234",
    "12 345 678",
    "3,5",
    "−7",
    "+0.25",
    "45 %",
    "99%",
    "1 23",
    "1234 567",
    "Москва",
    "Санкт-Петербург",
    "Paris",
    "London",
    "Год 1999",
    "Abc-где",
    "ёлка",
    "Ёж",
    "Müller",
    "日本",
    "x_y",
    "12a",
    "a1",
    "Чемпионат мира",
    "USA",
    "ООН",
    "Łódź",
    "  ",
    "(1)",
    "—2—",
    "café",
    "Ѣ",
    "iPhone 13",
    "да/нет",
];

pub fn random_cell(rng: &mut StdRng) -> String {
    if rng.gen_bool(0.8) {
        CELL_POOL.choose(rng).unwrap().to_string()
    } else {
        let a = CELL_POOL.choose(rng).unwrap().trim();
        let b = CELL_POOL.choose(rng).unwrap().trim();
        format!("{a} {b}").trim().to_owned()
    }
}

pub fn random_table(rng: &mut StdRng, page_id: u64) -> PlainTable {
    let n_rows = rng.gen_range(1..=8);
    let n_cols = rng.gen_range(1..=6);
    let header_rows = rng.gen_range(0..=2).min(n_rows);
    // some columns are kept single-kind so the *-only shares are not always zero
    let kinds: Vec<u8> = (0..n_cols).map(|_| rng.gen_range(0..5)).collect();
    let rows = (0..n_rows)
        .map(|r| {
            (0..n_cols)
                .map(|c| {
                    if r < header_rows {
                        return ["Год", "Город", "1", "2", "", "Team"]
                            .choose(rng)
                            .unwrap()
                            .to_string();
                    }
                    match kinds[c] {
                        0 => ["12", "3,5", "1 234", "", "-"]
                            .choose(rng)
                            .unwrap()
                            .to_string(),
                        1 => ["Москва", "ёлка", "ООН", "—"]
                            .choose(rng)
                            .unwrap()
                            .to_string(),
                        2 => ["Paris", "USA", "London", ""]
                            .choose(rng)
                            .unwrap()
                            .to_string(),
                        _ => random_cell(rng),
                    }
                })
                .collect()
        })
        .collect();
    PlainTable {
        page_id,
        page_title: format!("Страница {page_id}"),
        rows,
        header_rows,
        caption: None,
    }
}

pub fn to_extracted(t: &PlainTable, offset: u32) -> ExtractedTable {
    let rows = t
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .map(|s| {
                    if r < t.header_rows {
                        Cell::header(s)
                    } else {
                        Cell::data(s)
                    }
                })
                .collect()
        })
        .collect();
    let grid = CellGrid::new(rows).unwrap();
    ExtractedTable {
        table_id: TableId::new(t.page_id, offset),
        column_numeric: column_numeric_flags(&grid, t.header_rows),
        grid,
        header_rows: t.header_rows,
        caption: t.caption.clone(),
        context_before: vec![],
        context_after: vec![],
        page_title: t.page_title.clone(),
        url: format!("https://ru.wikipedia.org/wiki/{}", t.page_id),
    }
}

/// Write `tables` (offsets numbered per page in order) plus a listing of
/// `pages` page ids into a fresh corpus.
pub fn write_corpus(root: &Path, tables: &[PlainTable], pages: &[u64]) {
    let corpus = Corpus::new(root);
    corpus
        .init(&Manifest::new(
            date(),
            FilterConfig::default(),
            Default::default(),
        ))
        .unwrap();
    let at = Utc.with_ymd_and_hms(2021, 9, 13, 0, 0, 0).unwrap();
    let mut next: std::collections::HashMap<u64, u32> = Default::default();
    for t in tables {
        let off = next.entry(t.page_id).or_default();
        let e = to_extracted(t, *off);
        *off += 1;
        corpus
            .write_table(&e, &TableMetadata::new(&e, date(), at))
            .unwrap();
    }
    let titles: Vec<PageRef> = pages
        .iter()
        .map(|&p| PageRef::new(p, format!("Страница {p}")))
        .collect();
    corpus.write_titles(&titles).unwrap();
}

/// Random pages with 20 to 40 tables spread over them.
pub fn random_corpus(seed: u64) -> (Vec<PlainTable>, Vec<u64>) {
    let mut rng = StdRng::seed_from_u64(seed);
    let n_pages = rng.gen_range(10..=40);
    let pages: Vec<u64> = (0..n_pages)
        .map(|i| 1 + i * 7 + rng.gen_range(0..7))
        .collect();
    let n_tables = rng.gen_range(20..=40);
    let tables = (0..n_tables)
        .map(|_| {
            let p = pages[rng.gen_range(0..pages.len())];
            random_table(&mut rng, p)
        })
        .collect();
    (tables, pages)
}
