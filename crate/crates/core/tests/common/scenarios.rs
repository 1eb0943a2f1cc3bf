//! Multi-step checks shared by the focused tests and the acceptance run.

use std::path::Path;

use rand::rngs::StdRng;
use rand::SeedableRng;
use wikitables_core::controller::run_job;
use wikitables_core::extract::{extract_tables, ExtractedTable};
use wikitables_core::filter::{apply_filters, FilterConfig};
use wikitables_core::mockwiki::{MockPage, MockWiki};
use wikitables_core::source::{DumpSource, FetchOutcome, PageSource, SourceConfig};
use wikitables_core::stats::{
    compute_stats, search, superlatives, write_reports, QuerySpec, ReportOptions,
};
use wikitables_core::store::Corpus;

use super::gen::{random_table, to_extracted, write_corpus};
use super::golden::fixtures;
use super::oracle::PlainTable;
use super::{finish, job};

pub fn fixture_tables() -> Vec<ExtractedTable> {
    let src = DumpSource::open(&SourceConfig::dump(fixtures().join("dump"))).unwrap();
    let mut out = Vec::new();
    for p in src.titles() {
        if let FetchOutcome::Page(raw) = src.fetch(&p.unwrap()).unwrap() {
            out.extend(extract_tables(&raw).unwrap().tables);
        }
    }
    out
}

pub fn identity_keeps_fixtures() {
    let id = FilterConfig::default();
    assert!(id.is_identity());
    let tables = fixture_tables();
    assert!(!tables.is_empty());
    for t in tables {
        assert_eq!(apply_filters(&t, &id).as_ref(), Some(&t), "{}", t.table_id);
    }
}

/// Raises `min_cyrillic_ratio` from 0 to 1 over `n` random tables; a table once
/// dropped must stay dropped. Returns how many were dropped at ratio 1.
pub fn cyrillic_ratio_sweep(n: usize) -> usize {
    let mut rng = StdRng::seed_from_u64(7);
    let tables: Vec<_> = (0..n)
        .map(|i| to_extracted(&random_table(&mut rng, i as u64 + 1), 0))
        .collect();
    let mut dropped_at_end = 0;
    for t in &tables {
        let mut was_dropped = false;
        for i in 0..=20 {
            let r = i as f64 / 20.0;
            let cfg = FilterConfig {
                min_cyrillic_ratio: r,
                ..Default::default()
            };
            let dropped = apply_filters(t, &cfg).is_none();
            assert!(
                !(was_dropped && !dropped),
                "{} kept at {r} after a drop",
                t.table_id
            );
            was_dropped = dropped;
        }
        dropped_at_end += usize::from(was_dropped);
    }
    dropped_at_end
}

/// 20 tables of 5 columns, exactly three of the 100 columns Cyrillic-only.
pub fn cyrillic_column_corpus(root: &Path) {
    let mut tables = Vec::new();
    for i in 0..20u64 {
        let planted = i % 7 == 0;
        let rows = (0..4)
            .map(|r| {
                (0..5)
                    .map(|c| {
                        if planted && c == 2 {
                            ["Город", "Москва", "—", "Казань"][r].to_owned()
                        } else {
                            ["Paris", "12", "Год 1999", "x-y", ""][(c + r) % 5].to_owned()
                        }
                    })
                    .collect()
            })
            .collect();
        tables.push(PlainTable {
            page_id: i + 1,
            page_title: format!("T{i}"),
            rows,
            header_rows: 1,
            caption: None,
        });
    }
    write_corpus(root, &tables, &(1..=20).collect::<Vec<_>>());
}

pub fn cyrillic_column_share() {
    let dir = tempfile::tempdir().unwrap();
    cyrillic_column_corpus(dir.path());
    let s = compute_stats(dir.path(), Some(&FilterConfig::default())).unwrap();
    assert_eq!(s.columns_total, 100);
    assert_eq!(s.pct_cyrillic_only_columns, 3.0);
}

fn table(cols: usize, rows: usize) -> String {
    let mut s = String::from("<table>");
    for _ in 0..rows {
        s.push_str("<tr>");
        for c in 0..cols {
            s.push_str(&format!("<td>ячейка {c}</td>"));
        }
        s.push_str("</tr>");
    }
    s + "</table>"
}

const PROXY_VARS: [&str; 5] = [
    "http_proxy",
    "https_proxy",
    "HTTP_PROXY",
    "HTTPS_PROXY",
    "ALL_PROXY",
];

/// Crawls a small mock wiki, shuts it down, points every proxy variable at a
/// closed port and then runs statistics, reports, search and table reads.
pub fn offline_roundtrip() {
    let pages = vec![
        MockPage::new(1, "Чемпионат мира по ралли", &(table(5, 3) + &table(2, 2))),
        MockPage::new(2, "Чемпионат Европы", &table(6, 4)),
        MockPage::new(3, "Финал кубка чемпионата", &table(3, 3)),
        MockPage::new(4, "Другое", &table(7, 7)),
        MockPage::new(5, "ЧЕМПИОНАТ без таблиц", "<p>нет</p>"),
    ];
    let dir = tempfile::tempdir().unwrap();
    {
        let wiki = MockWiki::start(pages).unwrap();
        finish(run_job(job(&wiki.api_url(), dir.path())).unwrap().wait());
    }
    let saved: Vec<_> = PROXY_VARS.iter().map(std::env::var_os).collect();
    for v in PROXY_VARS {
        std::env::set_var(v, "http://127.0.0.1:1");
    }
    let outcome = std::panic::catch_unwind(|| offline_reads(dir.path()));
    for (v, old) in PROXY_VARS.iter().zip(saved) {
        match old {
            Some(old) => std::env::set_var(v, old),
            None => std::env::remove_var(v),
        }
    }
    if let Err(e) = outcome {
        std::panic::resume_unwind(e);
    }
}

fn offline_reads(root: &Path) {
    let s = compute_stats(root, None).unwrap();
    assert_eq!((s.pages_total, s.tables_total), (5, 5));
    assert!(superlatives(root).unwrap().widest.is_some());
    write_reports(root, &ReportOptions::default()).unwrap();

    let q = QuerySpec {
        title_substring: Some("чемпионат".into()),
        min_cols: Some(5),
        ..Default::default()
    };
    let hits = search(root, &q).unwrap();
    let titles: Vec<&str> = hits.tables.iter().map(|m| m.page_title.as_str()).collect();
    assert_eq!(titles, vec!["Чемпионат мира по ралли", "Чемпионат Европы"]);

    let all = search(root, &QuerySpec::default()).unwrap();
    assert_eq!(all.total, 5);
    for m in &all.tables {
        Corpus::new(root).read_table(m.table_id).unwrap();
    }

    // brute force over the metadata agrees with search
    for q in [
        QuerySpec {
            min_rows: Some(3),
            max_cols: Some(5),
            ..Default::default()
        },
        QuerySpec {
            has_numeric_column: Some(false),
            ..Default::default()
        },
        QuerySpec {
            title_substring: Some("Кубка".into()),
            ..Default::default()
        },
    ] {
        let expect: Vec<_> = all
            .tables
            .iter()
            .filter(|m| q.matches(m))
            .map(|m| m.table_id)
            .collect();
        let got: Vec<_> = search(root, &q)
            .unwrap()
            .tables
            .iter()
            .map(|m| m.table_id)
            .collect();
        assert_eq!(got, expect);
    }
}
