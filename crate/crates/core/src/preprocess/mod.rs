//! Column profiling, type inference, plan recommendation and execution.

mod execute;
mod plan;
mod profile;

use serde::Serialize;
use thiserror::Error;

pub use execute::*;
pub use plan::*;
pub use profile::*;

use crate::table::TableError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OverrideRejection {
    /// The dataset is larger than the size gate.
    SizeGate,
    /// Automatic mode was requested explicitly.
    AutoMode,
}

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("table has no rows or no columns")]
    EmptyTable,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("`{column}` has non-numeric values under {step}")]
    NonNumericUnderScaling { column: String, step: String },
    #[error("`{0}` still has nulls after preprocessing")]
    NullsRemaining(String),
    #[error("`{0}` has no values to fit")]
    NoValues(String),
    #[error("`{column}` has {levels} levels, expected 2")]
    NotBinary { column: String, levels: usize },
    #[error("`{column}`: level `{level}` was not seen during fitting")]
    UnseenLevel { column: String, level: String },
    #[error("target `{0}` is neither binary nor numeric")]
    UnsupportedTarget(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error("plan overrides rejected ({reason:?})")]
    OverridesRejected { reason: OverrideRejection },
    #[error(transparent)]
    Table(#[from] TableError),
}
