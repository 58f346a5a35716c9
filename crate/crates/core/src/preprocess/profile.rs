use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::exec::Exec;
use crate::table::{parse_number, Column, TabularDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageType {
    Integer,
    Real,
    String,
}

impl StorageType {
    pub fn is_numeric(self) -> bool {
        matches!(self, StorageType::Integer | StorageType::Real)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMetadata {
    pub name: String,
    pub storage_type: StorageType,
    pub null_count: usize,
    pub unique_count: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Mean length in characters of the non-null values of string columns.
    pub mean_str_len: Option<f64>,
    pub row_count: usize,
}

fn profile_column(col: &Column) -> ColumnMetadata {
    let values: Vec<&str> = col.non_null().collect();
    let numbers: Option<Vec<f64>> = values.iter().map(|v| parse_number(v)).collect();
    // An all-null column has no evidence of being numeric.
    let numbers = numbers.filter(|n| !n.is_empty());
    let (storage_type, unique_count, min, max, mean_str_len) = match numbers {
        Some(nums) => {
            let integer = nums.iter().all(|x| x.fract() == 0.0 && x.abs() < 9.007_199_254_740_992e15);
            let unique: HashSet<u64> = nums.iter().map(|x| (x + 0.0).to_bits()).collect();
            let min = nums.iter().copied().fold(f64::INFINITY, f64::min);
            let max = nums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let st = if integer { StorageType::Integer } else { StorageType::Real };
            (st, unique.len(), Some(min), Some(max), None)
        }
        None => {
            let unique: HashSet<&str> = values.iter().copied().collect();
            let mean = if values.is_empty() {
                None
            } else {
                Some(values.iter().map(|v| v.chars().count()).sum::<usize>() as f64 / values.len() as f64)
            };
            (StorageType::String, unique.len(), None, None, mean)
        }
    };
    ColumnMetadata {
        name: col.name.clone(),
        storage_type,
        null_count: col.cells.len() - values.len(),
        unique_count,
        min,
        max,
        mean_str_len,
        row_count: col.cells.len(),
    }
}

/// One metadata record per column, in column order.
pub fn profile_columns(table: &TabularDataset, exec: Exec) -> Result<Vec<ColumnMetadata>, PreprocessError> {
    if table.n_cols() == 0 || table.n_rows() == 0 {
        return Err(PreprocessError::EmptyTable);
    }
    Ok(exec.map_slice(table.columns(), profile_column))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Binary,
    Categorical,
    Numerical,
    Textual,
}

/// Constants of the column-typing heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypingThresholds {
    /// Level count always considered low cardinality.
    pub categorical_levels: usize,
    /// Fraction of rows below which the level count is low cardinality.
    pub categorical_fraction: f64,
    /// Longest mean string length for a categorical string column.
    pub max_mean_str_len: f64,
    /// A numeric column is numerical when unique_count exceeds this
    /// fraction of rows.
    pub numerical_uniqueness: f64,
}

impl Default for TypingThresholds {
    fn default() -> Self {
        Self {
            categorical_levels: 20,
            categorical_fraction: 0.05,
            max_mean_str_len: 20.0,
            numerical_uniqueness: 0.8,
        }
    }
}

pub fn infer_column_type(meta: &ColumnMetadata, t: &TypingThresholds) -> ColumnType {
    let rows = meta.row_count as f64;
    let few_levels = meta.unique_count as f64 <= (t.categorical_levels as f64).max(t.categorical_fraction * rows);
    let numeric = meta.storage_type.is_numeric();
    if meta.unique_count == 2 {
        ColumnType::Binary
    } else if numeric && meta.unique_count as f64 > t.numerical_uniqueness * rows {
        ColumnType::Numerical
    } else if numeric && few_levels {
        ColumnType::Categorical
    } else if !numeric && few_levels && meta.mean_str_len.unwrap_or(0.0) <= t.max_mean_str_len {
        ColumnType::Categorical
    } else if numeric {
        ColumnType::Numerical
    } else {
        ColumnType::Textual
    }
}
