//! Stage orchestration, run context and the audit trail.

mod audit;
mod config;
mod context;
mod engine;
mod output;

pub use audit::*;
pub use config::*;
pub use context::*;
pub use engine::*;
pub use output::*;
