//! Boosted-tree training and prediction, feature attribution, and image
//! detection.

mod explain;
mod gbm;
mod image;
mod report;

use thiserror::Error;

pub use explain::*;
pub use gbm::*;
pub use image::*;
pub use report::*;

#[derive(Debug, Error, PartialEq)]
pub enum InferError {
    #[error("target `{0}` is also listed as a feature")]
    TargetLeakage(String),
    #[error("{rows} rows, at least {min} needed")]
    TooFewRows { rows: usize, min: usize },
    #[error("target `{0}` is not 0/1")]
    NonBinaryTarget(String),
    #[error("column `{0}` is missing")]
    MissingFeature(String),
    #[error("column `{0}` has non-numeric values")]
    NonNumeric(String),
    #[error("no features to train on")]
    NoFeatures,
    #[error("{n} features exceed the exact Shapley bound of {max}")]
    TooManyFeatures { n: usize, max: usize },
    #[error("background sample is empty")]
    EmptyBackground,
    #[error("row and background widths differ from the model")]
    ShapeMismatch,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("detection client unavailable: {0}")]
    ClientUnavailable(String),
    #[error("cannot decode `{name}`: {reason}")]
    Image { name: String, reason: String },
}
