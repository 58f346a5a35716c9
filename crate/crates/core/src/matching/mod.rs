//! Header embedding, similarity-based model selection and image routing.

mod embed;
mod greedy;
mod registry;
mod route;
mod select;
mod similarity;

pub use embed::*;
pub use greedy::*;
pub use registry::*;
pub use route::*;
pub use select::*;
pub use similarity::*;
