//! Tabular input: CSV parsing, column-kind inference, and grouping of a
//! numeric column by a categorical one.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("input is not valid UTF-8")]
    Encoding,
    #[error("malformed CSV at line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("input contains no data rows")]
    Empty,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}` is {actual}, expected {expected}")]
    WrongKind {
        column: String,
        expected: ColumnKind,
        actual: ColumnKind,
    },
    #[error("group `{0}` has no numeric values")]
    EmptyGroup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Numeric,
}

impl std::fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ColumnKind::Categorical => "categorical",
            ColumnKind::Numeric => "numeric",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
        }
    }
}

/// A cell that looked numeric-ish but could not be used as a finite number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedCell {
    /// 1-based line number in the source text.
    pub line: u64,
    pub column: String,
    pub raw: String,
}

/// Parsed table. Cells are kept as text; numeric columns are interpreted on
/// demand so that the raw input survives serialization unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<String>>,
    /// 1-based source line of each row.
    pub row_lines: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Non-empty cells that failed numeric parsing in columns that are
    /// otherwise numeric-looking (majority of cells parse). These columns are
    /// classified categorical; the report lets callers surface the problem.
    pub skipped: Vec<SkippedCell>,
}

impl Dataset {
    pub fn column(&self, name: &str) -> Result<(usize, &Column), IngestError> {
        self.columns
            .iter()
            .enumerate()
            .find(|(_, c)| c.name == name)
            .ok_or_else(|| IngestError::UnknownColumn(name.to_string()))
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedSeries {
    pub group_label: String,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

/// Grouping result plus the number of rows dropped for empty or non-finite
/// value cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    pub series: Vec<GroupedSeries>,
    pub dropped_rows: usize,
}

/// Locale-independent: dot decimal separator only, no thousands separators.
pub fn parse_number(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() || t.contains(',') {
        return None;
    }
    let v: f64 = t.parse().ok()?;
    v.is_finite().then_some(v)
}

pub fn parse_csv(bytes: &[u8], options: CsvOptions) -> Result<Dataset, IngestError> {
    std::str::from_utf8(bytes).map_err(|_| IngestError::Encoding)?;
    check_quotes(bytes)?;

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(false)
        .from_reader(bytes);

    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut row_lines = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(&e, bytes)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let cells: Vec<String> = record.iter().map(str::to_string).collect();
        if options.has_header && header.is_none() {
            header = Some(cells);
            continue;
        }
        // A lone empty field is a blank line; csv already skips true blanks.
        if cells.len() == 1 && cells[0].is_empty() {
            continue;
        }
        rows.push(cells);
        row_lines.push(line);
    }

    if rows.is_empty() {
        return Err(IngestError::Empty);
    }
    let width = rows[0].len();
    let names = header.unwrap_or_else(|| (1..=width).map(|i| format!("column{i}")).collect());

    let mut columns = Vec::with_capacity(names.len());
    let mut skipped = Vec::new();
    for (ci, name) in names.iter().enumerate() {
        let mut parsed = 0usize;
        let mut bad = Vec::new();
        for (ri, row) in rows.iter().enumerate() {
            let cell = &row[ci];
            if cell.trim().is_empty() {
                continue;
            }
            if parse_number(cell).is_some() {
                parsed += 1;
            } else {
                bad.push(SkippedCell {
                    line: row_lines[ri],
                    column: name.clone(),
                    raw: cell.clone(),
                });
            }
        }
        let kind = if bad.is_empty() && parsed > 0 {
            ColumnKind::Numeric
        } else {
            if parsed > bad.len() {
                skipped.extend(bad);
            }
            ColumnKind::Categorical
        };
        columns.push(Column {
            name: name.clone(),
            kind,
        });
    }

    Ok(Dataset {
        columns,
        rows,
        row_lines,
        description: None,
        skipped,
    })
}

/// The csv reader accepts an unterminated quoted field at end of input; we
/// reject it and point at the line where the quote opened.
fn check_quotes(bytes: &[u8]) -> Result<(), IngestError> {
    let mut line = 1u64;
    let mut open_line = None;
    for &b in bytes {
        match b {
            b'"' => {
                open_line = match open_line {
                    Some(_) => None,
                    None => Some(line),
                }
            }
            b'\n' => line += 1,
            _ => {}
        }
    }
    match open_line {
        Some(line) => Err(IngestError::Malformed {
            line,
            message: "unterminated quoted field".into(),
        }),
        None => Ok(()),
    }
}

fn csv_error(e: &csv::Error, bytes: &[u8]) -> IngestError {
    let line = match e.position() {
        Some(p) => p.line(),
        // csv omits the position for some errors; blame the last line.
        None => bytes.iter().filter(|&&b| b == b'\n').count() as u64 + 1,
    };
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        _ => e.to_string(),
    };
    IngestError::Malformed { line, message }
}

/// Groups `value_col` by `group_col`.
///
/// Rows whose value cell is empty or not a finite number are dropped and
/// counted. A numeric column is accepted as the group column; its cells
/// are used verbatim as labels.
pub fn group_series(
    ds: &Dataset,
    group_col: &str,
    value_col: &str,
) -> Result<Grouping, IngestError> {
    let (gi, _) = ds.column(group_col)?;
    let (vi, vcol) = ds.column(value_col)?;
    let has_any_number = ds.rows.iter().any(|r| parse_number(&r[vi]).is_some());
    if vcol.kind != ColumnKind::Numeric && !has_any_number {
        return Err(IngestError::WrongKind {
            column: value_col.to_string(),
            expected: ColumnKind::Numeric,
            actual: vcol.kind,
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0;
    for row in &ds.rows {
        let label = row[gi].as_str();
        let slot = *index.entry(label).or_insert_with(|| {
            order.push(label.to_string());
            values.push(Vec::new());
            order.len() - 1
        });
        match parse_number(&row[vi]) {
            Some(v) => values[slot].push(v),
            None => dropped += 1,
        }
    }

    let mut series = Vec::with_capacity(order.len());
    for (label, vals) in order.into_iter().zip(values) {
        if vals.is_empty() {
            return Err(IngestError::EmptyGroup(label));
        }
        series.push(GroupedSeries {
            group_label: label,
            values: vals,
            unit: None,
        });
    }
    Ok(Grouping {
        series,
        dropped_rows: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset, IngestError> {
        parse_csv(s.as_bytes(), CsvOptions::default())
    }

    #[test]
    fn infers_kinds() {
        let ds = parse("g,v\nA,1\nA,2\nB,3").unwrap();
        assert_eq!(ds.rows.len(), 3);
        assert_eq!(ds.columns[0].kind, ColumnKind::Categorical);
        assert_eq!(ds.columns[1].kind, ColumnKind::Numeric);
    }

    #[test]
    fn non_numeric_cell_makes_column_categorical() {
        let ds = parse("g,v\nA,x").unwrap();
        assert_eq!(ds.columns[1].kind, ColumnKind::Categorical);
    }

    #[test]
    fn comma_decimal_is_not_a_number() {
        assert_eq!(parse_number("1,5"), None);
        assert_eq!(parse_number(" 2.5 "), Some(2.5));
        assert_eq!(parse_number("inf"), None);
        assert_eq!(parse_number("NaN"), None);
    }

    #[test]
    fn unbalanced_quote_reports_line() {
        let err = parse("g,v\nA,1\nB,\"2\n").unwrap_err();
        match err {
            IngestError::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_row_is_malformed() {
        let err = parse("g,v\nA,1\nB,2,3\n").unwrap_err();
        assert!(matches!(err, IngestError::Malformed { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn header_only_is_empty() {
        assert_eq!(parse("g,v\n").unwrap_err(), IngestError::Empty);
        assert_eq!(parse("").unwrap_err(), IngestError::Empty);
    }

    #[test]
    fn invalid_utf8() {
        let err = parse_csv(&[0x67, 0x2c, 0xff, 0xfe], CsvOptions::default()).unwrap_err();
        assert_eq!(err, IngestError::Encoding);
    }

    #[test]
    fn groups_preserve_first_appearance_and_row_order() {
        let ds = parse("g,v\nA,1\nA,2\nB,3\nB,4\nB,5\nA,6").unwrap();
        let g = group_series(&ds, "g", "v").unwrap();
        assert_eq!(g.series.len(), 2);
        assert_eq!(g.series[0].group_label, "A");
        assert_eq!(g.series[0].values, vec![1.0, 2.0, 6.0]);
        assert_eq!(g.series[1].values, vec![3.0, 4.0, 5.0]);
    }

    #[test]
    fn single_group() {
        let ds = parse("g,v\nA,1\nA,2").unwrap();
        assert_eq!(group_series(&ds, "g", "v").unwrap().series.len(), 1);
    }

    #[test]
    fn empty_cells_are_dropped_with_count() {
        let ds = parse("g,v\nA,1\nA,\nB,3").unwrap();
        let g = group_series(&ds, "g", "v").unwrap();
        assert_eq!(g.dropped_rows, 1);
        assert_eq!(g.series[0].values, vec![1.0]);
    }

    #[test]
    fn group_without_values_is_named() {
        let ds = parse("g,v\nA,1\nB,\n").unwrap();
        assert_eq!(
            group_series(&ds, "g", "v").unwrap_err(),
            IngestError::EmptyGroup("B".into())
        );
    }

    #[test]
    fn unknown_column() {
        let ds = parse("g,v\nA,1").unwrap();
        assert_eq!(
            group_series(&ds, "g", "w").unwrap_err(),
            IngestError::UnknownColumn("w".into())
        );
    }
}
