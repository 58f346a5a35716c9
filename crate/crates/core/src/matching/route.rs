use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::registry::{ModelDatabase, ModelDescriptor};
use crate::http::{self, ClientError};
use crate::ingest::FileArtifact;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifyTask {
    Modality,
    Disease,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: String,
    pub confidence: f64,
}

/// Vision-language model used to read modality and disease off an image.
///
/// `candidates` are the registry strings the answer should be drawn from:
/// modality names for the first step, captions for the second.
pub trait VisionLanguageClient: Send + Sync {
    fn classify(
        &self,
        image: &FileArtifact,
        task: ClassifyTask,
        modality: Option<&str>,
        candidates: &[String],
    ) -> Result<Classification, ClientError>;
}

/// Replays a fixed answer list in call order, repeating the last answer
/// once the list is exhausted.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct ScriptedVlm {
    pub script: Vec<Classification>,
    #[serde(default)]
    pub offline: bool,
    #[serde(skip)]
    cursor: Mutex<usize>,
}

impl Clone for ScriptedVlm {
    fn clone(&self) -> Self {
        Self::new(self.script.clone())
            .with_offline(self.offline)
    }
}

impl PartialEq for ScriptedVlm {
    fn eq(&self, other: &Self) -> bool {
        self.script == other.script && self.offline == other.offline
    }
}

impl ScriptedVlm {
    pub fn new(script: Vec<Classification>) -> Self {
        Self {
            script,
            offline: false,
            cursor: Mutex::new(0),
        }
    }

    pub fn with_offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn calls(&self) -> usize {
        *self.cursor.lock().unwrap()
    }
}

impl VisionLanguageClient for ScriptedVlm {
    fn classify(
        &self,
        _image: &FileArtifact,
        _task: ClassifyTask,
        _modality: Option<&str>,
        _candidates: &[String],
    ) -> Result<Classification, ClientError> {
        if self.offline {
            return Err(ClientError::Unavailable("scripted VLM is offline".into()));
        }
        let mut cursor = self.cursor.lock().unwrap();
        let answer = self
            .script
            .get(*cursor)
            .or(self.script.last())
            .cloned()
            .ok_or_else(|| ClientError::Protocol("scripted VLM has an empty script".into()))?;
        *cursor += 1;
        Ok(answer)
    }
}

/// `POST {base}/classify` with
/// `{"image": base64, "task": "modality"|"disease", "modality": .., "candidates": [..]}`
/// answered by `{"label": .., "confidence": ..}`.
#[derive(Debug, Clone)]
pub struct RemoteVlm {
    pub base_url: String,
}

#[derive(Serialize)]
struct ClassifyRequest<'a> {
    image: String,
    task: ClassifyTask,
    #[serde(skip_serializing_if = "Option::is_none")]
    modality: Option<&'a str>,
    candidates: &'a [String],
}

impl VisionLanguageClient for RemoteVlm {
    fn classify(
        &self,
        image: &FileArtifact,
        task: ClassifyTask,
        modality: Option<&str>,
        candidates: &[String],
    ) -> Result<Classification, ClientError> {
        use base64::Engine;
        let req = ClassifyRequest {
            image: base64::engine::general_purpose::STANDARD.encode(&image.bytes),
            task,
            modality,
            candidates,
        };
        http::post_json(&http::join(&self.base_url, "classify"), &req)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteThresholds {
    pub modality: f64,
    pub disease: f64,
    pub max_attempts: usize,
}

impl Default for RouteThresholds {
    fn default() -> Self {
        Self {
            modality: 0.5,
            disease: 0.5,
            max_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepConfidences {
    pub modality: f64,
    pub disease: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageRoute {
    pub modality: String,
    pub disease: String,
    pub confidences: StepConfidences,
    pub attempts: usize,
    /// Name of the image whose classification was accepted.
    pub image: String,
    pub model_id: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("no images to route")]
    NoImages,
    #[error("registry has no image models")]
    NoImageModels,
    #[error("max_attempts must be at least 1")]
    NoAttempts,
    #[error("routing inconclusive after {attempts} attempts")]
    RoutingInconclusive { attempts: usize },
    #[error("vision-language client unavailable: {0}")]
    ClientUnavailable(String),
}

impl From<ClientError> for RouteError {
    fn from(e: ClientError) -> Self {
        RouteError::ClientUnavailable(e.to_string())
    }
}

/// The image model whose modality equals `modality` (case-insensitive) and
/// whose caption mentions `disease`. Several matches resolve to the
/// smallest id; none is `None`.
pub fn select_image_model<'a>(
    registry: &'a ModelDatabase,
    modality: &str,
    disease: &str,
) -> Option<&'a ModelDescriptor> {
    let disease = disease.trim().to_lowercase();
    if disease.is_empty() {
        return None;
    }
    registry
        .image_models()
        .filter(|m| m.modality.eq_ignore_ascii_case(modality.trim()))
        .filter(|m| {
            m.caption()
                .is_some_and(|c| c.to_lowercase().contains(&disease))
        })
        .min_by(|a, b| a.id.cmp(&b.id))
}

/// Two-step modality then disease classification with seeded retries.
///
/// Each attempt draws an image uniformly at random, preferring ones not
/// yet tried. An attempt fails when a confidence is below its threshold,
/// the modality is not a registry modality, or no image model of that
/// modality mentions the disease.
pub fn route_image(
    images: &[FileArtifact],
    registry: &ModelDatabase,
    vlm: &dyn VisionLanguageClient,
    thresholds: RouteThresholds,
    seed: u64,
) -> Result<ImageRoute, RouteError> {
    if images.is_empty() {
        return Err(RouteError::NoImages);
    }
    if registry.image_models().next().is_none() {
        return Err(RouteError::NoImageModels);
    }
    if thresholds.max_attempts == 0 {
        return Err(RouteError::NoAttempts);
    }
    let modalities = registry.image_modalities();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tried = vec![false; images.len()];

    for attempt in 1..=thresholds.max_attempts {
        let untried: Vec<usize> = (0..images.len()).filter(|&i| !tried[i]).collect();
        let idx = if untried.is_empty() {
            rng.gen_range(0..images.len())
        } else {
            untried[rng.gen_range(0..untried.len())]
        };
        tried[idx] = true;
        let image = &images[idx];

        let m = vlm.classify(image, ClassifyTask::Modality, None, &modalities)?;
        let Some(modality) = modalities
            .iter()
            .find(|x| x.eq_ignore_ascii_case(m.label.trim()))
        else {
            continue;
        };
        if !(m.confidence >= thresholds.modality) {
            continue;
        }
        let captions: Vec<String> = registry
            .image_models()
            .filter(|d| d.modality.eq_ignore_ascii_case(modality))
            .filter_map(|d| d.caption().map(str::to_string))
            .collect();
        let d = vlm.classify(image, ClassifyTask::Disease, Some(modality), &captions)?;
        if !(d.confidence >= thresholds.disease) {
            continue;
        }
        if let Some(model) = select_image_model(registry, modality, &d.label) {
            return Ok(ImageRoute {
                modality: modality.clone(),
                disease: d.label.trim().to_string(),
                confidences: StepConfidences {
                    modality: m.confidence,
                    disease: d.confidence,
                },
                attempts: attempt,
                image: image.name.clone(),
                model_id: model.id.clone(),
            });
        }
    }
    Err(RouteError::RoutingInconclusive {
        attempts: thresholds.max_attempts,
    })
}
