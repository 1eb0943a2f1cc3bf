use serde::{Deserialize, Serialize};

/// Spans outside `1..=MAX_SPAN` are treated as 1.
pub const MAX_SPAN: i64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOrigin {
    Real,
    SpanCopy,
    Pad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub text: String,
    pub is_header: bool,
    pub origin: CellOrigin,
}

impl Cell {
    pub fn data(text: &str) -> Self {
        Cell {
            text: text.to_owned(),
            is_header: false,
            origin: CellOrigin::Real,
        }
    }

    pub fn header(text: &str) -> Self {
        Cell {
            is_header: true,
            ..Cell::data(text)
        }
    }

    pub fn pad() -> Self {
        Cell {
            text: String::new(),
            is_header: false,
            origin: CellOrigin::Pad,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GridError {
    #[error("table has no rows")]
    NoRows,
    #[error("table has no cells")]
    NoColumns,
    #[error("row {row} has {len} cells, expected {expected}")]
    Ragged {
        row: usize,
        len: usize,
        expected: usize,
    },
}

/// Rectangular grid of cells, at least 1×1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellGrid {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<Cell>>,
}

impl CellGrid {
    pub fn new(rows: Vec<Vec<Cell>>) -> Result<Self, GridError> {
        let n_cols = rows.first().ok_or(GridError::NoRows)?.len();
        if n_cols == 0 {
            return Err(GridError::NoColumns);
        }
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
            return Err(GridError::Ragged {
                row,
                len: r.len(),
                expected: n_cols,
            });
        }
        Ok(CellGrid {
            n_rows: rows.len(),
            n_cols,
            rows,
        })
    }

    /// Grid of plain data cells, with the first `header_rows` rows marked as headers.
    pub fn from_texts(texts: Vec<Vec<String>>, header_rows: usize) -> Result<Self, GridError> {
        let rows = texts
            .into_iter()
            .enumerate()
            .map(|(r, row)| {
                row.into_iter()
                    .map(|text| Cell {
                        text,
                        is_header: r < header_rows,
                        origin: CellOrigin::Real,
                    })
                    .collect()
            })
            .collect();
        CellGrid::new(rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.rows[row][col]
    }

    pub fn text(&self, row: usize, col: usize) -> &str {
        &self.rows[row][col].text
    }

    pub fn row_texts(&self, row: usize) -> Vec<&str> {
        self.rows[row].iter().map(|c| c.text.as_str()).collect()
    }

    pub fn to_texts(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|c| c.text.clone()).collect())
            .collect()
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.rows.iter().flatten()
    }

    /// Texts of column `col` below the header rows.
    pub fn data_column(&self, col: usize, header_rows: usize) -> impl Iterator<Item = &str> {
        self.rows
            .iter()
            .skip(header_rows)
            .map(move |r| r[col].text.as_str())
    }

    /// Sub-grid made of the given row and column indices. Both lists must be
    /// non-empty.
    pub(crate) fn select(&self, rows: &[usize], cols: &[usize]) -> CellGrid {
        debug_assert!(!rows.is_empty() && !cols.is_empty());
        CellGrid {
            n_rows: rows.len(),
            n_cols: cols.len(),
            rows: rows
                .iter()
                .map(|&r| cols.iter().map(|&c| self.rows[r][c].clone()).collect())
                .collect(),
        }
    }
}

/// One `<td>`/`<th>` as it appears in the markup, spans not yet applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCell {
    pub text: String,
    pub is_header: bool,
    pub colspan: i64,
    pub rowspan: i64,
}

impl RawCell {
    pub fn new(text: &str, is_header: bool) -> Self {
        RawCell {
            text: text.to_owned(),
            is_header,
            colspan: 1,
            rowspan: 1,
        }
    }

    pub fn span(mut self, colspan: i64, rowspan: i64) -> Self {
        self.colspan = colspan;
        self.rowspan = rowspan;
        self
    }
}

/// A table as a list of `<tr>` rows, each a list of cells.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawTable {
    pub rows: Vec<Vec<RawCell>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanWarning {
    pub row: usize,
    pub cell: usize,
    pub attribute: &'static str,
    pub value: i64,
}

fn clamp_span(
    value: i64,
    row: usize,
    cell: usize,
    attribute: &'static str,
    warnings: &mut Vec<SpanWarning>,
) -> usize {
    if (1..=MAX_SPAN).contains(&value) {
        value as usize
    } else {
        warnings.push(SpanWarning {
            row,
            cell,
            attribute,
            value,
        });
        1
    }
}

/// Expand row/column spans into a rectangular grid.
///
/// Each cell lands in the first free slot of its row. Covered slots receive a
/// `SpanCopy` of the cell; slots that are already taken keep their occupant. A
/// rowspan never creates rows past the last `<tr>`. Short rows are right-padded
/// with `Pad` cells up to the widest row.
pub fn normalize_grid(table: &RawTable) -> Result<(CellGrid, Vec<SpanWarning>), GridError> {
    let n_rows = table.rows.len();
    if n_rows == 0 {
        return Err(GridError::NoRows);
    }
    let mut warnings = Vec::new();
    let mut slots: Vec<Vec<Option<Cell>>> = vec![Vec::new(); n_rows];

    for (r, row) in table.rows.iter().enumerate() {
        let mut c = 0;
        for (i, raw) in row.iter().enumerate() {
            let colspan = clamp_span(raw.colspan, r, i, "colspan", &mut warnings);
            let rowspan = clamp_span(raw.rowspan, r, i, "rowspan", &mut warnings).min(n_rows - r);
            while matches!(slots[r].get(c), Some(Some(_))) {
                c += 1;
            }
            for (dr, slot_row) in slots[r..r + rowspan].iter_mut().enumerate() {
                for dc in 0..colspan {
                    let col = c + dc;
                    if slot_row.len() <= col {
                        slot_row.resize(col + 1, None);
                    }
                    if slot_row[col].is_none() {
                        let origin = if dr == 0 && dc == 0 {
                            CellOrigin::Real
                        } else {
                            CellOrigin::SpanCopy
                        };
                        slot_row[col] = Some(Cell {
                            text: raw.text.clone(),
                            is_header: raw.is_header,
                            origin,
                        });
                    }
                }
            }
            c += colspan;
        }
    }

    let n_cols = slots.iter().map(Vec::len).max().unwrap_or(0);
    if n_cols == 0 {
        return Err(GridError::NoColumns);
    }
    let rows = slots
        .into_iter()
        .map(|row| {
            let mut row: Vec<Cell> = row
                .into_iter()
                .map(|s| s.unwrap_or_else(Cell::pad))
                .collect();
            row.resize_with(n_cols, Cell::pad);
            row
        })
        .collect();
    Ok((CellGrid::new(rows)?, warnings))
}

/// Number of leading rows made only of header cells. Padding is ignored, but a row
/// needs at least one real or spanned header cell to count.
pub fn detect_header(grid: &CellGrid) -> usize {
    grid.rows()
        .iter()
        .take_while(|row| {
            let mut cells = row
                .iter()
                .filter(|c| c.origin != CellOrigin::Pad)
                .peekable();
            cells.peek().is_some() && cells.all(|c| c.is_header)
        })
        .count()
}
