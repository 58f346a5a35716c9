//! The model database: deployable models keyed by id.
//!
//! ```json
//! {
//!   "table": { "MODEL_01": { "modality": "...", "headers": ["age", ...], "output": "anxiety" } },
//!   "image": { "MODEL_02": { "modality": "...", "caption": "..." } }
//! }
//! ```

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    #[error("cannot read registry: {0}")]
    Io(String),
    #[error("invalid registry JSON: {0}")]
    Json(String),
    #[error("model id `{0}` appears more than once")]
    DuplicateId(String),
    #[error("table model `{0}` has no headers")]
    EmptyHeaders(String),
    #[error("table model `{id}` lists header `{header}` twice")]
    DuplicateHeader { id: String, header: String },
    #[error("table model `{id}`: output `{output}` is not among its headers")]
    OutputNotInHeaders { id: String, output: String },
    #[error("image model `{0}` has an empty caption")]
    EmptyCaption(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Table,
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ModelSpec {
    Table { headers: Vec<String>, output: String },
    Image { caption: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelDescriptor {
    pub id: String,
    pub modality: String,
    pub spec: ModelSpec,
}

impl ModelDescriptor {
    pub fn table(id: &str, modality: &str, headers: &[&str], output: &str) -> Self {
        Self {
            id: id.into(),
            modality: modality.into(),
            spec: ModelSpec::Table {
                headers: headers.iter().map(|h| h.to_string()).collect(),
                output: output.into(),
            },
        }
    }

    pub fn image(id: &str, modality: &str, caption: &str) -> Self {
        Self {
            id: id.into(),
            modality: modality.into(),
            spec: ModelSpec::Image {
                caption: caption.into(),
            },
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.spec {
            ModelSpec::Table { .. } => ModelKind::Table,
            ModelSpec::Image { .. } => ModelKind::Image,
        }
    }

    /// Required headers; empty for image models.
    pub fn headers(&self) -> &[String] {
        match &self.spec {
            ModelSpec::Table { headers, .. } => headers,
            ModelSpec::Image { .. } => &[],
        }
    }

    pub fn output(&self) -> Option<&str> {
        match &self.spec {
            ModelSpec::Table { output, .. } => Some(output),
            ModelSpec::Image { .. } => None,
        }
    }

    pub fn caption(&self) -> Option<&str> {
        match &self.spec {
            ModelSpec::Image { caption } => Some(caption),
            ModelSpec::Table { .. } => None,
        }
    }

    fn validate(&self) -> Result<(), RegistryError> {
        match &self.spec {
            ModelSpec::Table { headers, output } => {
                if headers.is_empty() {
                    return Err(RegistryError::EmptyHeaders(self.id.clone()));
                }
                let mut seen = HashSet::new();
                for h in headers {
                    if !seen.insert(h) {
                        return Err(RegistryError::DuplicateHeader {
                            id: self.id.clone(),
                            header: h.clone(),
                        });
                    }
                }
                if !headers.contains(output) {
                    return Err(RegistryError::OutputNotInHeaders {
                        id: self.id.clone(),
                        output: output.clone(),
                    });
                }
            }
            ModelSpec::Image { caption } => {
                if caption.trim().is_empty() {
                    return Err(RegistryError::EmptyCaption(self.id.clone()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TableEntry {
    modality: String,
    headers: Vec<String>,
    output: String,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ImageEntry {
    modality: String,
    caption: String,
}

#[derive(Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    #[serde(default)]
    table: BTreeMap<String, TableEntry>,
    #[serde(default)]
    image: BTreeMap<String, ImageEntry>,
}

/// Validated, immutable model registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelDatabase {
    models: Vec<ModelDescriptor>,
}

impl ModelDatabase {
    pub fn from_models(models: Vec<ModelDescriptor>) -> Result<Self, RegistryError> {
        let mut ids = HashSet::new();
        for m in &models {
            if !ids.insert(m.id.as_str()) {
                return Err(RegistryError::DuplicateId(m.id.clone()));
            }
            m.validate()?;
        }
        Ok(Self { models })
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let file: RegistryFile =
            serde_json::from_str(text).map_err(|e| RegistryError::Json(e.to_string()))?;
        let mut models = Vec::new();
        for (id, e) in file.table {
            models.push(ModelDescriptor {
                id,
                modality: e.modality,
                spec: ModelSpec::Table {
                    headers: e.headers,
                    output: e.output,
                },
            });
        }
        for (id, e) in file.image {
            models.push(ModelDescriptor {
                id,
                modality: e.modality,
                spec: ModelSpec::Image { caption: e.caption },
            });
        }
        Self::from_models(models)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RegistryError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut file = RegistryFile::default();
        for m in &self.models {
            match &m.spec {
                ModelSpec::Table { headers, output } => {
                    file.table.insert(
                        m.id.clone(),
                        TableEntry {
                            modality: m.modality.clone(),
                            headers: headers.clone(),
                            output: output.clone(),
                        },
                    );
                }
                ModelSpec::Image { caption } => {
                    file.image.insert(
                        m.id.clone(),
                        ImageEntry {
                            modality: m.modality.clone(),
                            caption: caption.clone(),
                        },
                    );
                }
            }
        }
        serde_json::to_string_pretty(&file).expect("registry serializes")
    }

    pub fn models(&self) -> &[ModelDescriptor] {
        &self.models
    }

    pub fn get(&self, id: &str) -> Option<&ModelDescriptor> {
        self.models.iter().find(|m| m.id == id)
    }

    pub fn table_models(&self) -> impl Iterator<Item = &ModelDescriptor> {
        self.models.iter().filter(|m| m.kind() == ModelKind::Table)
    }

    pub fn image_models(&self) -> impl Iterator<Item = &ModelDescriptor> {
        self.models.iter().filter(|m| m.kind() == ModelKind::Image)
    }

    /// Distinct image modalities, sorted.
    pub fn image_modalities(&self) -> Vec<String> {
        let mut v: Vec<String> = self.image_models().map(|m| m.modality.clone()).collect();
        v.sort();
        v.dedup();
        v
    }
}
