use std::io::{Cursor, Read};

use thiserror::Error;

use super::artifact::FileArtifact;
use super::mime::{detect_mime, Mime};

pub const DEFAULT_MAX_DEPTH: usize = 8;
pub const DEFAULT_MAX_UNCOMPRESSED: u64 = 1 << 30;

#[derive(Debug, Error, PartialEq)]
pub enum ArchiveError {
    #[error("`{0}` is not a ZIP archive")]
    NotAnArchive(String),
    #[error("archive nesting exceeds the maximum depth of {max}")]
    DepthExceeded { max: usize },
    #[error("corrupt archive `{name}`: {reason}")]
    CorruptArchive { name: String, reason: String },
    #[error("uncompressed content exceeds {limit} bytes")]
    ZipBomb { limit: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchiveLimits {
    pub max_depth: usize,
    pub max_uncompressed: u64,
}

impl Default for ArchiveLimits {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
            max_uncompressed: DEFAULT_MAX_UNCOMPRESSED,
        }
    }
}

/// Enumerates every non-archive leaf of a ZIP, depth first, in entry order.
///
/// Nested ZIPs are descended into and never returned. XLSX workbooks are
/// leaves. Each leaf has its MIME set and `depth` one greater than its
/// container. Everything happens in memory.
pub fn unpack_recursive(
    artifact: &FileArtifact,
    limits: ArchiveLimits,
) -> Result<Vec<FileArtifact>, ArchiveError> {
    if detect_mime(&artifact.bytes) != Mime::Zip {
        return Err(ArchiveError::NotAnArchive(artifact.name.clone()));
    }
    let mut out = Vec::new();
    let mut budget = limits.max_uncompressed;
    walk(artifact, limits, &mut budget, &mut out)?;
    Ok(out)
}

fn walk(
    archive_artifact: &FileArtifact,
    limits: ArchiveLimits,
    budget: &mut u64,
    out: &mut Vec<FileArtifact>,
) -> Result<(), ArchiveError> {
    let corrupt = |reason: String| ArchiveError::CorruptArchive {
        name: archive_artifact.name.clone(),
        reason,
    };
    let mut archive = zip::ZipArchive::new(Cursor::new(archive_artifact.bytes.as_slice()))
        .map_err(|e| corrupt(e.to_string()))?;
    let depth = archive_artifact.depth + 1;
    for i in 0..archive.len() {
        let mut entry = archive.by_index(i).map_err(|e| corrupt(e.to_string()))?;
        if entry.is_dir() {
            continue;
        }
        if depth > limits.max_depth {
            return Err(ArchiveError::DepthExceeded {
                max: limits.max_depth,
            });
        }
        if entry.size() > *budget {
            return Err(ArchiveError::ZipBomb {
                limit: limits.max_uncompressed,
            });
        }
        let name = format!("{}/{}", archive_artifact.name, entry.name());
        let mut bytes = Vec::with_capacity(entry.size().min(1 << 20) as usize);
        // Declared sizes can lie; cap the actual read as well.
        (&mut entry)
            .take(*budget + 1)
            .read_to_end(&mut bytes)
            .map_err(|e| corrupt(e.to_string()))?;
        if bytes.len() as u64 > *budget {
            return Err(ArchiveError::ZipBomb {
                limit: limits.max_uncompressed,
            });
        }
        *budget -= bytes.len() as u64;
        drop(entry);

        let mime = detect_mime(&bytes);
        let child = FileArtifact {
            name,
            bytes,
            mime: Some(mime),
            depth,
        };
        if mime == Mime::Zip {
            walk(&child, limits, budget, out)?;
        } else {
            out.push(child);
        }
    }
    Ok(())
}
