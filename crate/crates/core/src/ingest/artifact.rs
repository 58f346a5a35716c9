use serde::{Serialize, Serializer};

use super::mime::Mime;
use crate::digest::sha256_hex;

/// A file payload moving through the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileArtifact {
    pub name: String,
    pub bytes: Vec<u8>,
    pub mime: Option<Mime>,
    /// Archive nesting depth; 0 for top-level inputs.
    pub depth: usize,
}

impl FileArtifact {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Self {
            name: name.into(),
            bytes,
            mime: None,
            depth: 0,
        }
    }

    pub fn with_mime(mut self, mime: Mime) -> Self {
        self.mime = Some(mime);
        self
    }

    pub fn read(path: &std::path::Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(Self::new(path.display().to_string(), bytes))
    }
}

// Artifacts are digested by content hash, never by embedding raw bytes.
impl Serialize for FileArtifact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("FileArtifact", 5)?;
        st.serialize_field("name", &self.name)?;
        st.serialize_field("mime", &self.mime.map(Mime::as_str))?;
        st.serialize_field("depth", &self.depth)?;
        st.serialize_field("len", &self.bytes.len())?;
        st.serialize_field("sha256", &sha256_hex(&self.bytes))?;
        st.end()
    }
}
