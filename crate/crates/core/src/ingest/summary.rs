use std::collections::BTreeMap;

use serde::Serialize;

use super::artifact::FileArtifact;
use super::mime::Mime;

/// Counts of classified files per MIME string.
///
/// `application/octet-stream` and artifacts without a MIME go to
/// `unknown_count`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TypeSummary {
    pub entries: BTreeMap<String, usize>,
    pub unknown_count: usize,
}

impl TypeSummary {
    pub fn total(&self) -> usize {
        self.entries.values().sum::<usize>() + self.unknown_count
    }

    pub fn count(&self, mime: Mime) -> usize {
        self.entries.get(mime.as_str()).copied().unwrap_or(0)
    }
}

pub fn summarize_types(artifacts: &[FileArtifact]) -> TypeSummary {
    let mut summary = TypeSummary::default();
    for a in artifacts {
        match a.mime {
            Some(m) if m != Mime::OctetStream => {
                *summary.entries.entry(m.as_str().to_string()).or_default() += 1
            }
            _ => summary.unknown_count += 1,
        }
    }
    summary
}
