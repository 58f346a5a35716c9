use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::{self, ClientError};
use crate::ingest::{FileArtifact, Mime};
use crate::pixels::{self, PixelBox};

/// Finds regions of an image that carry identifying content.
pub trait VisualRedactionClient: Send + Sync {
    fn find_regions(&self, image: &FileArtifact) -> Result<Vec<PixelBox>, ClientError>;
}

#[derive(Debug, Error, PartialEq)]
pub enum RedactError {
    #[error("`{0}` is not a PNG or JPEG image")]
    NotAnImage(String),
    #[error("cannot decode `{name}`: {reason}")]
    Decode { name: String, reason: String },
    #[error("redaction client unavailable: {0}")]
    ClientUnavailable(String),
}

/// Returns a fixed list of boxes for every image, or fails when offline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockRedactionClient {
    pub boxes: Vec<PixelBox>,
    #[serde(default)]
    pub offline: bool,
}

impl VisualRedactionClient for MockRedactionClient {
    fn find_regions(&self, _image: &FileArtifact) -> Result<Vec<PixelBox>, ClientError> {
        if self.offline {
            return Err(ClientError::Unavailable("mock redaction client is offline".into()));
        }
        Ok(self.boxes.clone())
    }
}

/// `POST {base}/redact-regions` with `{"image": base64, "name": ...}`,
/// answered by `{"boxes": [{"x_min":..,"y_min":..,"x_max":..,"y_max":..}]}`.
#[derive(Debug, Clone)]
pub struct RemoteRedactionClient {
    pub base_url: String,
}

#[derive(Serialize)]
struct RegionRequest<'a> {
    image: String,
    name: &'a str,
}

#[derive(Deserialize)]
struct RegionResponse {
    boxes: Vec<PixelBox>,
}

impl VisualRedactionClient for RemoteRedactionClient {
    fn find_regions(&self, image: &FileArtifact) -> Result<Vec<PixelBox>, ClientError> {
        use base64::Engine;
        let req = RegionRequest {
            image: base64::engine::general_purpose::STANDARD.encode(&image.bytes),
            name: &image.name,
        };
        let resp: RegionResponse = http::post_json(&http::join(&self.base_url, "redact-regions"), &req)?;
        Ok(resp.boxes)
    }
}

/// Paints every region reported by `client` solid black.
///
/// An image without regions is returned unchanged. Otherwise the result is
/// re-encoded as PNG so the painted pixels stay exactly black.
pub fn redact_image(
    artifact: &FileArtifact,
    client: &dyn VisualRedactionClient,
) -> Result<FileArtifact, RedactError> {
    let mime = artifact
        .mime
        .unwrap_or_else(|| crate::ingest::detect_mime(&artifact.bytes));
    if !mime.is_image() {
        return Err(RedactError::NotAnImage(artifact.name.clone()));
    }
    let boxes = client
        .find_regions(artifact)
        .map_err(|e| RedactError::ClientUnavailable(e.to_string()))?;
    if boxes.is_empty() {
        return Ok(artifact.clone().with_mime(mime));
    }
    let mut img = pixels::decode(&artifact.bytes).map_err(|e| RedactError::Decode {
        name: artifact.name.clone(),
        reason: e.to_string(),
    })?;
    for b in boxes {
        if let Some(b) = b.clip(img.width(), img.height()) {
            pixels::fill_black(&mut img, b);
        }
    }
    Ok(FileArtifact {
        name: artifact.name.clone(),
        bytes: pixels::encode_png(&img),
        mime: Some(Mime::Png),
        depth: artifact.depth,
    })
}
