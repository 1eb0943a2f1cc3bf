#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use wikitables_core::extract::{detect_header, normalize_grid, CellOrigin, RawCell, RawTable};

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub text: String,
    pub header: bool,
    pub origin: CellOrigin,
}

fn effective(span: i64) -> usize {
    if (1..=1000).contains(&span) {
        span as usize
    } else {
        1
    }
}

/// Fixed-size matrix wide enough for every cell laid end to end; each cell claims
/// the free positions of its rectangle, then the occupied width is cut out.
pub fn oracle(t: &RawTable) -> Option<(Vec<Vec<Slot>>, usize)> {
    let n = t.rows.len();
    let width: usize = t
        .rows
        .iter()
        .flatten()
        .map(|c| effective(c.colspan))
        .sum::<usize>()
        + 1;
    let mut m: Vec<Vec<Option<Slot>>> = vec![vec![None; width]; n];
    let mut bad_spans = 0;
    for (r, row) in t.rows.iter().enumerate() {
        let mut x = 0;
        for cell in row {
            let cs = effective(cell.colspan);
            let rs = effective(cell.rowspan);
            bad_spans +=
                usize::from(cs as i64 != cell.colspan) + usize::from(rs as i64 != cell.rowspan);
            while m[r][x].is_some() {
                x += 1;
            }
            for rr in r..n.min(r + rs) {
                for cc in x..x + cs {
                    if m[rr][cc].is_none() {
                        m[rr][cc] = Some(Slot {
                            text: cell.text.clone(),
                            header: cell.is_header,
                            origin: if rr == r && cc == x {
                                CellOrigin::Real
                            } else {
                                CellOrigin::SpanCopy
                            },
                        });
                    }
                }
            }
            x += cs;
        }
    }
    let cols = (0..width)
        .filter(|&c| m.iter().any(|row| row[c].is_some()))
        .max()?
        + 1;
    let grid = m
        .into_iter()
        .map(|row| {
            row.into_iter()
                .take(cols)
                .map(|s| {
                    s.unwrap_or(Slot {
                        text: String::new(),
                        header: false,
                        origin: CellOrigin::Pad,
                    })
                })
                .collect()
        })
        .collect();
    Some((grid, bad_spans))
}

pub fn span() -> impl Strategy<Value = i64> {
    prop_oneof![
        8 => 1i64..=3,
        1 => -1i64..=0,
        1 => Just(5000i64),
    ]
}

pub fn raw_table() -> impl Strategy<Value = RawTable> {
    let cell = ("[a-e]{0,2}", any::<bool>(), span(), span()).prop_map(
        |(text, is_header, colspan, rowspan)| RawCell {
            text,
            is_header,
            colspan,
            rowspan,
        },
    );
    prop::collection::vec(prop::collection::vec(cell, 0..=5), 1..=5)
        .prop_map(|rows| RawTable { rows })
}

/// Compares `normalize_grid` and `detect_header` with the oracle on one table.
pub fn check(t: &RawTable) -> Result<(), TestCaseError> {
    let expected = oracle(t);
    match normalize_grid(t) {
        Err(_) => prop_assert!(expected.is_none()),
        Ok((grid, warnings)) => {
            let (want, bad) = expected.expect("oracle found no cells");
            prop_assert_eq!(warnings.len(), bad);
            prop_assert_eq!(grid.n_rows(), want.len());
            prop_assert_eq!(grid.n_cols(), want[0].len());
            for (r, row) in want.iter().enumerate() {
                prop_assert_eq!(grid.rows()[r].len(), grid.n_cols());
                for (c, s) in row.iter().enumerate() {
                    let cell = grid.cell(r, c);
                    prop_assert_eq!(&cell.text, &s.text);
                    prop_assert_eq!(cell.is_header, s.header);
                    prop_assert_eq!(cell.origin, s.origin);
                }
            }
            let header = want
                .iter()
                .take_while(|row| {
                    let real: Vec<_> = row.iter().filter(|s| s.origin != CellOrigin::Pad).collect();
                    !real.is_empty() && real.iter().all(|s| s.header)
                })
                .count();
            prop_assert_eq!(detect_header(&grid), header);
        }
    }
    Ok(())
}
