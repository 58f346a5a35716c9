//! Column-oriented string table shared by every stage.
//!
//! Cells are stored as text. An empty cell is a null. Numeric stages parse
//! on demand and write numbers back with Rust's shortest round-trip
//! formatting, so a value survives any number of render/parse cycles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("column `{0}` does not exist")]
    UnknownColumn(String),
    #[error("duplicate header `{0}`")]
    DuplicateHeader(String),
    #[error("column `{name}` has {got} cells, expected {expected}")]
    LengthMismatch {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("cell {row} of column `{column}` is not numeric: {value:?}")]
    NotNumeric {
        column: String,
        row: usize,
        value: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub cells: Vec<String>,
}

impl Column {
    pub fn new(name: impl Into<String>, cells: Vec<String>) -> Self {
        Self {
            name: name.into(),
            cells,
        }
    }

    pub fn from_numbers(name: impl Into<String>, values: &[f64]) -> Self {
        Self::new(name, values.iter().map(|v| format_number(*v)).collect())
    }

    pub fn non_null(&self) -> impl Iterator<Item = &str> {
        self.cells.iter().map(String::as_str).filter(|c| !is_null(c))
    }

    /// Parses every cell as `f64`. Nulls are rejected.
    pub fn to_f64(&self) -> Result<Vec<f64>, TableError> {
        self.cells
            .iter()
            .enumerate()
            .map(|(row, c)| {
                parse_number(c).ok_or_else(|| TableError::NotNumeric {
                    column: self.name.clone(),
                    row,
                    value: c.clone(),
                })
            })
            .collect()
    }
}

/// A rectangular table. All columns have the same number of cells.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TabularDataset {
    columns: Vec<Column>,
}

impl TabularDataset {
    pub fn new(columns: Vec<Column>) -> Result<Self, TableError> {
        let mut seen = std::collections::HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(TableError::DuplicateHeader(c.name.clone()));
            }
        }
        if let Some(first) = columns.first() {
            let expected = first.cells.len();
            for c in &columns {
                if c.cells.len() != expected {
                    return Err(TableError::LengthMismatch {
                        name: c.name.clone(),
                        got: c.cells.len(),
                        expected,
                    });
                }
            }
        }
        Ok(Self { columns })
    }

    /// Builds a table from a header row and row-major records.
    pub fn from_rows(headers: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self, TableError> {
        let mut columns: Vec<Column> = headers
            .into_iter()
            .map(|h| Column::new(h, Vec::with_capacity(rows.len())))
            .collect();
        for row in rows {
            for (i, col) in columns.iter_mut().enumerate() {
                col.cells.push(row.get(i).cloned().unwrap_or_default());
            }
        }
        Self::new(columns)
    }

    pub fn headers(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn columns_mut(&mut self) -> &mut [Column] {
        &mut self.columns
    }

    pub fn into_columns(self) -> Vec<Column> {
        self.columns
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.cells.len())
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty() || self.n_rows() == 0
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column, TableError> {
        self.column(name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn row(&self, index: usize) -> Vec<&str> {
        self.columns.iter().map(|c| c.cells[index].as_str()).collect()
    }

    /// Keeps only the given rows, in the given order.
    pub fn take_rows(&self, rows: &[usize]) -> Self {
        Self {
            columns: self
                .columns
                .iter()
                .map(|c| Column::new(c.name.clone(), rows.iter().map(|&r| c.cells[r].clone()).collect()))
                .collect(),
        }
    }

    /// Projects and renames columns: each `(source, new_name)` pair becomes
    /// one output column.
    pub fn select_renamed(&self, pairs: &[(String, String)]) -> Result<Self, TableError> {
        let cols = pairs
            .iter()
            .map(|(src, dst)| {
                self.require(src)
                    .map(|c| Column::new(dst.clone(), c.cells.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(cols)
    }

    /// RFC 4180 CSV with a header row.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        // Writing into a Vec cannot fail.
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .expect("in-memory write");
        for r in 0..self.n_rows() {
            w.write_record(self.row(r)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

pub fn is_null(cell: &str) -> bool {
    cell.is_empty()
}

pub fn parse_number(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        // Normalise negative zero.
        return "0".to_string();
    }
    format!("{v}")
}
