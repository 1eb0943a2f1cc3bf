//! Table extraction from rendered page HTML.
//!
//! A page is parsed once. Every `<table>` element gets an offset by the document
//! order of its opening tag, nested tables included, and tables that cannot be
//! turned into a grid still use up their offset so ids stay stable.

mod context;
mod grid;
mod text;

use std::fmt;

use ego_tree::NodeRef;
use regex::Regex;
use scraper::node::Node;
use scraper::Html;
use serde::{Deserialize, Serialize};

use crate::filter::column_numeric_flags;
use crate::source::RawPage;

pub use context::{ContextIndex, CONTEXT_WORDS};
pub use grid::{
    detect_header, normalize_grid, Cell, CellGrid, CellOrigin, GridError, RawCell, RawTable,
    SpanWarning, MAX_SPAN,
};
pub use text::normalize_cell_text;

/// Deeper documents are rejected instead of risking the recursive walkers.
pub const MAX_DOM_DEPTH: usize = 2048;

/// Surrogate table identity: page id plus the table's position in the page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TableId {
    pub page_id: u64,
    pub offset: u32,
}

impl TableId {
    pub fn new(page_id: u64, offset: u32) -> Self {
        TableId { page_id, offset }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.page_id, self.offset)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractedTable {
    pub table_id: TableId,
    pub grid: CellGrid,
    pub header_rows: usize,
    pub caption: Option<String>,
    pub context_before: Vec<String>,
    pub context_after: Vec<String>,
    pub page_title: String,
    pub url: String,
    pub column_numeric: Vec<bool>,
}

impl ExtractedTable {
    /// Header rows cover the whole grid.
    pub fn is_all_header(&self) -> bool {
        self.header_rows == self.grid.n_rows()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableWarning {
    pub table_id: TableId,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("document nesting depth exceeds {MAX_DOM_DEPTH}")]
    TooDeep,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractOptions {
    /// Tables whose `class` attribute matches this regex are skipped. Their offsets
    /// are still consumed.
    pub exclude_table_classes: Option<String>,
}

#[derive(Debug, Default)]
pub struct PageExtraction {
    pub tables: Vec<ExtractedTable>,
    pub warnings: Vec<TableWarning>,
    /// Number of `<table>` elements seen, i.e. the number of offsets consumed.
    pub table_elements: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Extractor {
    exclude: Option<Regex>,
}

impl Extractor {
    pub fn new(opts: &ExtractOptions) -> crate::Result<Self> {
        let exclude = opts
            .exclude_table_classes
            .as_deref()
            .map(Regex::new)
            .transpose()
            .map_err(|e| crate::Error::Config(format!("exclude_table_classes: {e}")))?;
        Ok(Extractor { exclude })
    }

    pub fn extract(&self, page: &RawPage) -> Result<PageExtraction, ExtractError> {
        let doc = Html::parse_document(&page.html);
        if dom_depth(doc.tree.root()) > MAX_DOM_DEPTH {
            return Err(ExtractError::TooDeep);
        }
        let ctx = ContextIndex::build(&doc);
        let mut out = PageExtraction::default();

        let tables = doc
            .tree
            .root()
            .descendants()
            .filter(|n| matches!(n.value(), Node::Element(el) if el.name() == "table"));
        for (offset, node) in tables.enumerate() {
            out.table_elements += 1;
            let table_id = TableId::new(page.page.page_id, offset as u32);
            let Node::Element(el) = node.value() else {
                unreachable!()
            };
            if let (Some(re), Some(class)) = (&self.exclude, el.attr("class")) {
                if re.is_match(class) {
                    continue;
                }
            }

            let (raw, caption) = parse_table(node);
            let (grid, span_warnings) = match normalize_grid(&raw) {
                Ok(g) => g,
                Err(e) => {
                    out.warnings.push(TableWarning {
                        table_id,
                        message: format!("skipped: {e}"),
                    });
                    continue;
                }
            };
            out.warnings
                .extend(span_warnings.into_iter().map(|w| TableWarning {
                    table_id,
                    message: format!(
                        "{} {} on row {} cell {} clamped to 1",
                        w.attribute, w.value, w.row, w.cell
                    ),
                }));

            let header_rows = detect_header(&grid);
            let (context_before, context_after) = ctx.context(node.id());
            out.tables.push(ExtractedTable {
                table_id,
                column_numeric: column_numeric_flags(&grid, header_rows),
                grid,
                header_rows,
                caption,
                context_before,
                context_after,
                page_title: page.page.title.clone(),
                url: page.url.clone(),
            });
        }
        Ok(out)
    }
}

/// Extract every table of `page` with default options.
pub fn extract_tables(page: &RawPage) -> Result<PageExtraction, ExtractError> {
    Extractor::default().extract(page)
}

fn dom_depth(root: NodeRef<'_, Node>) -> usize {
    let mut max = 0;
    let mut stack = vec![(root, 0usize)];
    while let Some((n, d)) = stack.pop() {
        max = max.max(d);
        if d > MAX_DOM_DEPTH {
            break;
        }
        stack.extend(n.children().map(|c| (c, d + 1)));
    }
    max
}

fn element_name<'a>(n: &NodeRef<'a, Node>) -> Option<&'a str> {
    match n.value() {
        Node::Element(el) => Some(el.name()),
        _ => None,
    }
}

fn parse_table(table: NodeRef<'_, Node>) -> (RawTable, Option<String>) {
    let mut raw = RawTable::default();
    let mut caption = None;
    for child in table.children() {
        match element_name(&child) {
            Some("caption") if caption.is_none() => {
                let mut s = String::new();
                text::collect_text(child, &mut s);
                let s = normalize_cell_text(&s);
                caption = Some(s).filter(|s| !s.is_empty());
            }
            Some("thead" | "tbody" | "tfoot") => {
                for tr in child.children().filter(|n| element_name(n) == Some("tr")) {
                    raw.rows.push(parse_row(tr));
                }
            }
            Some("tr") => raw.rows.push(parse_row(child)),
            _ => {}
        }
    }
    (raw, caption)
}

fn parse_row(tr: NodeRef<'_, Node>) -> Vec<RawCell> {
    tr.children()
        .filter_map(|cell| {
            let Node::Element(el) = cell.value() else {
                return None;
            };
            let is_header = match el.name() {
                "th" => true,
                "td" => false,
                _ => return None,
            };
            let mut s = String::new();
            text::collect_text(cell, &mut s);
            Some(RawCell {
                text: normalize_cell_text(&s),
                is_header,
                colspan: parse_span(el.attr("colspan")),
                rowspan: parse_span(el.attr("rowspan")),
            })
        })
        .collect()
}

/// Leading integer of a span attribute. Missing means 1, unparsable means 0 (and is
/// later clamped with a warning).
fn parse_span(attr: Option<&str>) -> i64 {
    let Some(v) = attr else { return 1 };
    let v = v.trim();
    let (neg, digits) = match v.as_bytes().first() {
        Some(b'-') => (true, &v[1..]),
        Some(b'+') => (false, &v[1..]),
        _ => (false, v),
    };
    let end = digits
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(digits.len());
    if end == 0 {
        return 0;
    }
    let n = digits[..end].parse::<i64>().unwrap_or(i64::MAX);
    if neg {
        -n
    } else {
        n
    }
}
