//! Hand-designed 25-table corpus with ranking answers worked out by hand.

use std::path::Path;

use wikitables_core::extract::TableId;
use wikitables_core::stats::{header_frequency, size_histogram, superlatives, table_rich_pages};

use super::gen::write_corpus;
use super::oracle::PlainTable;

pub struct Designed {
    pub _dir: tempfile::TempDir,
    pub root: std::path::PathBuf,
}

fn t(
    page: u64,
    title: &str,
    cols: usize,
    rows: usize,
    header: Option<&[&str]>,
    fill: &str,
) -> PlainTable {
    let mut grid = vec![vec![fill.to_owned(); cols]; rows];
    if let Some(h) = header {
        for (c, cell) in grid[0].iter_mut().enumerate() {
            *cell = h.get(c).copied().unwrap_or("").to_owned();
        }
    }
    PlainTable {
        page_id: page,
        page_title: title.into(),
        rows: grid,
        header_rows: usize::from(header.is_some()),
        caption: None,
    }
}

pub fn designed() -> Designed {
    let god: &[&str] = &["Год"];
    let one: &[&str] = &["1"];
    let team: &[&str] = &["Команда", "Очки"];
    let mut tables = vec![
        t(10, "Альфа", 5, 3, Some(god), "x"),
        t(10, "Альфа", 5, 4, Some(god), "x"),
        t(10, "Альфа", 6, 10, Some(god), "x"),
        t(10, "Альфа", 3, 5, Some(god), "x"),
        t(20, "Бета", 5, 3, Some(one), "x"),
        t(20, "Бета", 3, 5, Some(team), "x"),
        t(20, "Бета", 3, 5, Some(team), "x"),
    ];
    for _ in 0..6 {
        tables.push(t(30, "Гамма", 2, 2, Some(one), "x"));
    }
    tables.push(t(40, "Дельта", 9, 3, Some(god), "x"));
    tables.push(t(40, "Дельта", 3, 5, None, "x"));
    for _ in 0..3 {
        tables.push(t(50, "Эпсилон", 1, 1, None, "x"));
    }
    tables.push(t(50, "Эпсилон", 5, 5, None, "x"));
    tables.push(t(50, "Эпсилон", 7, 2, None, &"х".repeat(50)));
    tables.push(t(60, "Жета", 4, 40, None, "1"));
    tables.push(t(70, "Зета", 2, 1, None, "x"));
    tables.push(t(70, "Зета", 2, 1, None, "x"));
    tables.push(t(70, "Зета", 3, 5, None, "x"));
    tables.push(t(70, "Зета", 5, 3, None, "x"));
    assert_eq!(tables.len(), 25);
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &tables, &[10, 20, 30, 40, 50, 60, 70, 80]);
    Designed {
        root: dir.path().to_owned(),
        _dir: dir,
    }
}

fn owned(v: &[(&str, u64)]) -> Vec<(String, u64)> {
    v.iter().map(|(k, n)| (k.to_string(), *n)).collect()
}

pub fn size_ranking(root: &Path) {
    let h = size_histogram(root, 4).unwrap();
    assert_eq!(
        h.top,
        owned(&[("2x2", 6), ("3x5", 5), ("1x1", 3), ("5x3", 3)])
    );
    assert_eq!(h.rows.values().sum::<u64>(), 25);
    assert_eq!(h.cols[&3], 5);
    assert_eq!(h.rows[&40], 1);
    assert!(size_histogram(root, 0).unwrap().top.is_empty());
}

pub fn header_ranking(root: &Path) {
    assert_eq!(
        header_frequency(root, 3, false).unwrap(),
        owned(&[("1", 7), ("Год", 5), ("Команда", 2)])
    );
    assert_eq!(
        header_frequency(root, 3, true).unwrap(),
        owned(&[("Год", 5), ("Команда", 2), ("Очки", 2)])
    );
}

pub fn rich_page_ranking(root: &Path) {
    assert_eq!(
        table_rich_pages(root, 3, 3, 5).unwrap(),
        owned(&[("Альфа", 3), ("Бета", 1), ("Дельта", 1)])
    );
    assert_eq!(
        table_rich_pages(root, 10, 0, 0).unwrap(),
        owned(&[
            ("Гамма", 6),
            ("Эпсилон", 5),
            ("Альфа", 4),
            ("Зета", 4),
            ("Бета", 3),
            ("Дельта", 2),
            ("Жета", 1),
        ])
    );
    assert!(table_rich_pages(root, 10, 41, 0).unwrap().is_empty());
}

pub fn superlative_tables(root: &Path) {
    let s = superlatives(root).unwrap();
    let w = s.widest.unwrap();
    assert_eq!(
        (w.table_id, w.page_title.as_str(), w.value),
        (TableId::new(40, 0), "Дельта", 9)
    );
    let l = s.longest.unwrap();
    assert_eq!((l.table_id, l.value), (TableId::new(60, 0), 40));
    let c = s.most_cells.unwrap();
    assert_eq!((c.table_id, c.value), (TableId::new(60, 0), 160));
    let m = s.most_characters.unwrap();
    assert_eq!((m.table_id, m.value), (TableId::new(50, 4), 700));
}
