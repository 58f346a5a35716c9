//! Clinical data pipeline engine: file-type detection, PII masking,
//! embedding-based model selection, preprocessing and explainable
//! inference, run as seven audited stages.

pub mod anonymize;
pub mod digest;
pub mod exec;
pub mod http;
pub mod infer;
pub mod ingest;
pub mod matching;
pub mod pipeline;
pub mod pixels;
pub mod preprocess;
pub mod table;

pub use exec::Exec;
pub use pipeline::{run_pipeline, Engine, EngineConfig, PipelineContext};
pub use table::{Column, TabularDataset};
