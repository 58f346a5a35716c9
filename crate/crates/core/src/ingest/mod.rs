//! File-type identification and tabular parsing.
//!
//! Classification looks only at content. Archives are walked in memory and
//! every leaf is classified on its own.

mod archive;
mod artifact;
mod mime;
mod summary;
mod tabular;

pub use archive::{unpack_recursive, ArchiveError, ArchiveLimits, DEFAULT_MAX_DEPTH, DEFAULT_MAX_UNCOMPRESSED};
pub use artifact::FileArtifact;
pub use mime::{detect_mime, is_supported_mime, sniff_delimiter, Mime};
pub use summary::{summarize_types, TypeSummary};
pub use tabular::{parse_tabular, ParseError};
