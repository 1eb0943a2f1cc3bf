//! Language customization: cell predicates and the row/column/table filters built on
//! top of them.
//!
//! The predicates here are the only definitions of "numeric", "null", "Latin-only"
//! and friends in the crate. Both [`apply_filters`] and the statistics in
//! [`crate::stats`] call them, so a filter and the matching corpus percentage can
//! never disagree.

mod chars;

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::extract::{CellGrid, ExtractedTable};

pub use chars::{char_class, classify_chars, is_cyrillic, CharClass, CharClassProfile};

pub const DEFAULT_NULL_THRESHOLD: f64 = 0.7;

/// Placeholders that stand for an empty cell, compared after trimming.
const NULL_PLACEHOLDERS: [&str; 3] = ["-", "—", "–"];

fn numeric_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        // sign, integer part (plain or thousands-grouped by a space / thin space /
        // narrow no-break space), optional fraction, optional percent sign
        Regex::new(
            r"^[+\-\u{2212}]?(?:[0-9]{1,3}(?:[ \u{2009}\u{202F}][0-9]{3})+|[0-9]+)(?:[.,][0-9]+)?(?: ?%)?$",
        )
        .expect("numeric grammar")
    })
}

pub fn is_numeric_cell(text: &str) -> bool {
    let t = text.trim();
    !t.is_empty() && numeric_re().is_match(t)
}

pub fn is_null_cell(text: &str) -> bool {
    let t = text.trim();
    t.is_empty() || NULL_PLACEHOLDERS.contains(&t) || t.eq_ignore_ascii_case("n/a")
}

pub fn is_nonstring_cell(text: &str) -> bool {
    classify_chars(text).is_nonstring()
}

/// True when strictly more than `threshold` of the cells are null. An empty slice
/// is never mostly null.
pub fn is_mostly_null<'a>(cells: impl IntoIterator<Item = &'a str>, threshold: f64) -> bool {
    let (mut n, mut nulls) = (0usize, 0usize);
    for c in cells {
        n += 1;
        if is_null_cell(c) {
            nulls += 1;
        }
    }
    n > 0 && (nulls as f64) > threshold * n as f64
}

/// Every non-null cell satisfies `pred`, and there is at least one non-null cell.
fn all_non_null<'a>(cells: impl IntoIterator<Item = &'a str>, pred: impl Fn(&str) -> bool) -> bool {
    let mut seen = false;
    for c in cells {
        if is_null_cell(c) {
            continue;
        }
        if !pred(c) {
            return false;
        }
        seen = true;
    }
    seen
}

pub fn is_numeric_column<'a>(data_cells: impl IntoIterator<Item = &'a str>) -> bool {
    all_non_null(data_cells, is_numeric_cell)
}

pub fn is_latin_only_column<'a>(data_cells: impl IntoIterator<Item = &'a str>) -> bool {
    all_non_null(data_cells, |c| classify_chars(c).is_latin_only())
}

pub fn is_cyrillic_only_column<'a>(data_cells: impl IntoIterator<Item = &'a str>) -> bool {
    all_non_null(data_cells, |c| classify_chars(c).is_cyrillic_only())
}

/// Per-column numeric flags for a grid whose first `header_rows` rows are headers.
pub fn column_numeric_flags(grid: &CellGrid, header_rows: usize) -> Vec<bool> {
    (0..grid.n_cols())
        .map(|c| is_numeric_column(grid.data_column(c, header_rows)))
        .collect()
}

/// Knobs of the language-customization filter. The default value is the identity
/// filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_cyrillic_ratio: f64,
    pub drop_latin_only_columns: bool,
    pub drop_numeric_only_columns: bool,
    pub drop_mostly_null_rows: bool,
    pub drop_mostly_null_columns: bool,
    pub null_threshold: f64,
    pub min_rows: usize,
    pub min_cols: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_cyrillic_ratio: 0.0,
            drop_latin_only_columns: false,
            drop_numeric_only_columns: false,
            drop_mostly_null_rows: false,
            drop_mostly_null_columns: false,
            null_threshold: DEFAULT_NULL_THRESHOLD,
            min_rows: 0,
            min_cols: 0,
        }
    }
}

impl FilterConfig {
    /// Names of the fields holding out-of-range values, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.min_cyrillic_ratio) {
            out.push(format!(
                "min_cyrillic_ratio must be in [0, 1], got {}",
                self.min_cyrillic_ratio
            ));
        }
        if !(self.null_threshold > 0.0 && self.null_threshold <= 1.0) {
            out.push(format!(
                "null_threshold must be in (0, 1], got {}",
                self.null_threshold
            ));
        }
        out
    }

    pub fn validate(&self) -> crate::Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::Validation(p))
        }
    }

    pub fn is_identity(&self) -> bool {
        self.min_cyrillic_ratio == 0.0
            && !self.drop_latin_only_columns
            && !self.drop_numeric_only_columns
            && !self.drop_mostly_null_rows
            && !self.drop_mostly_null_columns
            && self.min_rows == 0
            && self.min_cols == 0
    }
}

/// Run the configured filters over one table.
///
/// Steps run in a fixed order, each on the survivors of the previous one:
/// mostly-null rows, mostly-null columns, Latin-only columns, numeric-only columns,
/// then the table-level Cyrillic ratio and minimum dimensions. Header rows are
/// never dropped on their own and never take part in column predicates.
///
/// Returns `None` when the table is dropped or ends up empty.
pub fn apply_filters(table: &ExtractedTable, cfg: &FilterConfig) -> Option<ExtractedTable> {
    let grid = &table.grid;
    let header_rows = table.header_rows.min(grid.n_rows());
    let mut rows: Vec<usize> = (0..grid.n_rows()).collect();
    let mut cols: Vec<usize> = (0..grid.n_cols()).collect();

    if cfg.drop_mostly_null_rows {
        rows.retain(|&r| {
            r < header_rows
                || !is_mostly_null(cols.iter().map(|&c| grid.text(r, c)), cfg.null_threshold)
        });
    }

    let data_rows: Vec<usize> = rows.iter().copied().filter(|&r| r >= header_rows).collect();
    let column = |c: usize| data_rows.iter().map(move |&r| grid.text(r, c));

    if cfg.drop_mostly_null_columns {
        cols.retain(|&c| !is_mostly_null(column(c), cfg.null_threshold));
    }
    if cfg.drop_latin_only_columns {
        cols.retain(|&c| !is_latin_only_column(column(c)));
    }
    if cfg.drop_numeric_only_columns {
        cols.retain(|&c| !is_numeric_column(column(c)));
    }

    if rows.is_empty() || cols.is_empty() {
        return None;
    }

    let survivor = grid.select(&rows, &cols);
    if survivor.n_rows() < cfg.min_rows || survivor.n_cols() < cfg.min_cols {
        return None;
    }

    if cfg.min_cyrillic_ratio > 0.0 {
        let mut profile = CharClassProfile::default();
        for cell in survivor.cells() {
            profile += classify_chars(&cell.text);
        }
        let denom = profile.letters_and_digits();
        let ratio = if denom == 0 {
            0.0
        } else {
            profile.cyrillic as f64 / denom as f64
        };
        if ratio < cfg.min_cyrillic_ratio {
            return None;
        }
    }

    let kept_headers = rows.iter().filter(|&&r| r < header_rows).count();
    let column_numeric = column_numeric_flags(&survivor, kept_headers);
    Some(ExtractedTable {
        grid: survivor,
        header_rows: kept_headers,
        column_numeric,
        ..table.clone()
    })
}
