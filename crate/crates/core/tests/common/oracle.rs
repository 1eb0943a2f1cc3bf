//! Slow, obviously-correct reference implementations used as test oracles.
#![allow(dead_code)]

use wikitables_core::stats::CorpusStats;

pub fn is_cyr(c: char) -> bool {
    ('\u{0400}'..='\u{052F}').contains(&c)
}

pub fn is_null(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t == "-" || t == "—" || t == "–" || t.to_lowercase() == "n/a"
}

fn digits(cs: &[char], mut i: usize) -> usize {
    while i < cs.len() && cs[i].is_ascii_digit() {
        i += 1;
    }
    i
}

/// Hand-rolled scanner for the numeric cell grammar.
pub fn is_numeric(s: &str) -> bool {
    let cs: Vec<char> = s.trim().chars().collect();
    if cs.is_empty() {
        return false;
    }
    let mut i = 0;
    if matches!(cs[0], '+' | '-' | '\u{2212}') {
        i = 1;
    }
    let end = digits(&cs, i);
    if end == i {
        return false;
    }
    let first_group = end - i;
    i = end;
    // thousands groups: only after a first group of 1..=3 digits
    let mut grouped = false;
    while i < cs.len() && matches!(cs[i], ' ' | '\u{2009}' | '\u{202F}') {
        let e = digits(&cs, i + 1);
        if e - (i + 1) == 3 && (first_group <= 3) && (e == cs.len() || !cs[e].is_ascii_digit()) {
            grouped = true;
            i = e;
        } else {
            break;
        }
    }
    let _ = grouped;
    if i < cs.len() && matches!(cs[i], '.' | ',') {
        let e = digits(&cs, i + 1);
        if e == i + 1 {
            return false;
        }
        i = e;
    }
    if i < cs.len() && cs[i] == ' ' && i + 1 < cs.len() && cs[i + 1] == '%' {
        i += 1;
    }
    if i < cs.len() && cs[i] == '%' {
        i += 1;
    }
    i == cs.len()
}

/// Letter of some script: Cyrillic-block code points count as letters.
fn is_letter(c: char) -> bool {
    is_cyr(c) || c.is_alphabetic()
}

pub fn is_nonstring(s: &str) -> bool {
    s.chars()
        .any(|c| c.is_ascii_digit() || !(is_letter(c) || c.is_whitespace()))
}

pub fn mostly_null(cells: &[&str], threshold: f64) -> bool {
    if cells.is_empty() {
        return false;
    }
    let nulls = cells.iter().filter(|c| is_null(c)).count();
    nulls as f64 / cells.len() as f64 > threshold
}

fn only(cells: &[&str], f: impl Fn(&str) -> bool) -> bool {
    let non_null: Vec<&&str> = cells.iter().filter(|c| !is_null(c)).collect();
    !non_null.is_empty() && non_null.iter().all(|c| f(c))
}

/// Some letter satisfies `mine`, and every letter does.
fn letters_only(s: &str, mine: impl Fn(char) -> bool) -> bool {
    let letters: Vec<char> = s.chars().filter(|&c| is_letter(c)).collect();
    !letters.is_empty() && letters.into_iter().all(mine)
}

pub fn latin_only_cell(s: &str) -> bool {
    letters_only(s, |c| c.is_ascii_alphabetic())
}

pub fn cyrillic_only_cell(s: &str) -> bool {
    letters_only(s, is_cyr)
}

/// One table as plain texts plus its header row count.
#[derive(Debug, Clone)]
pub struct PlainTable {
    pub page_id: u64,
    pub page_title: String,
    pub rows: Vec<Vec<String>>,
    pub header_rows: usize,
    pub caption: Option<String>,
}

impl PlainTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.rows[0].len()
    }

    pub fn column(&self, c: usize) -> Vec<&str> {
        self.rows[self.header_rows..]
            .iter()
            .map(|r| r[c].as_str())
            .collect()
    }
}

#[derive(Debug, Default)]
pub struct Expected {
    pub pages: u64,
    pub tables: u64,
    pub rows: u64,
    pub cols: u64,
    pub cells: u64,
    pub chars: u64,
    pub cyrillic: u64,
    pub latin: u64,
    pub nonstring: u64,
    pub null_rows: u64,
    pub null_cols: u64,
    pub cyr_cols: u64,
    pub lat_cols: u64,
    pub num_cols: u64,
}

pub fn naive_stats(tables: &[PlainTable], pages: u64) -> Expected {
    let mut e = Expected {
        pages,
        ..Default::default()
    };
    for t in tables {
        e.tables += 1;
        e.rows += t.n_rows() as u64;
        e.cols += t.n_cols() as u64;
        for row in &t.rows {
            let cells: Vec<&str> = row.iter().map(String::as_str).collect();
            if mostly_null(&cells, 0.7) {
                e.null_rows += 1;
            }
            for s in row {
                e.cells += 1;
                e.chars += s.chars().count() as u64;
                e.cyrillic += s.chars().filter(|&c| is_cyr(c)).count() as u64;
                e.latin += s.chars().filter(|c| c.is_ascii_alphabetic()).count() as u64;
                if is_nonstring(s) {
                    e.nonstring += 1;
                }
            }
        }
        for c in 0..t.n_cols() {
            let col = t.column(c);
            e.null_cols += u64::from(mostly_null(&col, 0.7));
            e.cyr_cols += u64::from(only(&col, cyrillic_only_cell));
            e.lat_cols += u64::from(only(&col, latin_only_cell));
            e.num_cols += u64::from(only(&col, is_numeric));
        }
    }
    e
}

/// `a / b`, or 0 for an empty denominator.
pub fn div(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Field-by-field comparison, naming every mismatch.
pub fn compare(s: &CorpusStats, e: &Expected) -> Vec<String> {
    let mut bad = Vec::new();
    let counts = [
        ("pages_total", s.pages_total, e.pages),
        ("tables_total", s.tables_total, e.tables),
        ("rows_total", s.rows_total, e.rows),
        ("columns_total", s.columns_total, e.cols),
        ("cells_total", s.cells_total, e.cells),
    ];
    for (name, got, want) in counts {
        if got != want {
            bad.push(format!("{name}: {got} != {want}"));
        }
    }
    let reals = [
        (
            "avg_cells_per_table",
            s.avg_cells_per_table,
            div(e.cells, e.tables),
        ),
        (
            "avg_tables_per_page",
            s.avg_tables_per_page,
            div(e.tables, e.pages),
        ),
        (
            "avg_cells_per_row",
            s.avg_cells_per_row,
            div(e.cells, e.rows),
        ),
        (
            "avg_cells_per_column",
            s.avg_cells_per_column,
            div(e.cells, e.cols),
        ),
        (
            "avg_chars_per_cell",
            s.avg_chars_per_cell,
            div(e.chars, e.cells),
        ),
        (
            "avg_cyrillic_per_cell",
            s.avg_cyrillic_per_cell,
            div(e.cyrillic, e.cells),
        ),
        (
            "avg_latin_per_cell",
            s.avg_latin_per_cell,
            div(e.latin, e.cells),
        ),
        (
            "pct_nonstring_cells",
            s.pct_nonstring_cells,
            100.0 * div(e.nonstring, e.cells),
        ),
        (
            "pct_mostly_null_rows",
            s.pct_mostly_null_rows,
            100.0 * div(e.null_rows, e.rows),
        ),
        (
            "pct_mostly_null_columns",
            s.pct_mostly_null_columns,
            100.0 * div(e.null_cols, e.cols),
        ),
        (
            "pct_cyrillic_only_columns",
            s.pct_cyrillic_only_columns,
            100.0 * div(e.cyr_cols, e.cols),
        ),
        (
            "pct_latin_only_columns",
            s.pct_latin_only_columns,
            100.0 * div(e.lat_cols, e.cols),
        ),
        (
            "pct_numeric_only_columns",
            s.pct_numeric_only_columns,
            100.0 * div(e.num_cols, e.cols),
        ),
    ];
    for (name, got, want) in reals {
        if !close(got, want) {
            bad.push(format!("{name}: {got} != {want}"));
        }
    }
    bad
}
