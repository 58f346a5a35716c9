use serde::{Deserialize, Serialize};

use super::InferError;
use crate::http::{self, ClientError};
use crate::ingest::FileArtifact;
use crate::pixels::{self, PixelBox};

pub const DETECTION_CSV_HEADER: [&str; 7] = ["image", "x_min", "y_min", "x_max", "y_max", "label", "score"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
    pub label: String,
    pub score: f64,
}

impl Detection {
    pub fn pixel_box(&self) -> PixelBox {
        PixelBox::new(self.x_min, self.y_min, self.x_max, self.y_max)
    }

    /// Why this detection is unusable on a `width x height` image, if it is.
    pub fn problem(&self, width: u32, height: u32) -> Option<String> {
        if !self.pixel_box().is_well_formed() {
            Some("empty or inverted box".into())
        } else if !self.pixel_box().fits(width, height) {
            Some(format!("box exceeds {width}x{height} image"))
        } else if !(0.0..=1.0).contains(&self.score) {
            Some(format!("score {} outside [0,1]", self.score))
        } else {
            None
        }
    }
}

pub trait DetectionClient: Send + Sync {
    fn detect(&self, image: &FileArtifact, model_id: &str) -> Result<Vec<Detection>, ClientError>;
}

/// Returns the same detections for every image, or fails when offline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockDetectionClient {
    #[serde(default)]
    pub detections: Vec<Detection>,
    #[serde(default)]
    pub offline: bool,
}

impl DetectionClient for MockDetectionClient {
    fn detect(&self, _image: &FileArtifact, _model_id: &str) -> Result<Vec<Detection>, ClientError> {
        if self.offline {
            return Err(ClientError::Unavailable("mock detector is offline".into()));
        }
        Ok(self.detections.clone())
    }
}

/// `POST {base}/detect` with `{"image": base64, "model_id": ..}`, answered
/// by a JSON list of detections.
#[derive(Debug, Clone)]
pub struct RemoteDetectionClient {
    pub base_url: String,
}

#[derive(Serialize)]
struct DetectRequest<'a> {
    image: String,
    model_id: &'a str,
}

impl DetectionClient for RemoteDetectionClient {
    fn detect(&self, image: &FileArtifact, model_id: &str) -> Result<Vec<Detection>, ClientError> {
        use base64::Engine;
        let req = DetectRequest {
            image: base64::engine::general_purpose::STANDARD.encode(&image.bytes),
            model_id,
        };
        http::post_json(&http::join(&self.base_url, "detect"), &req)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejected {
    pub image: String,
    pub detection: Detection,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageInference {
    /// One per input, in input order; unchanged when nothing was detected.
    pub annotated: Vec<FileArtifact>,
    pub rows: Vec<(String, Detection)>,
    pub rejected: Vec<Rejected>,
}

impl ImageInference {
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(DETECTION_CSV_HEADER).expect("in-memory write");
        for (img, d) in &self.rows {
            w.write_record([
                img.clone(),
                d.x_min.to_string(),
                d.y_min.to_string(),
                d.x_max.to_string(),
                d.y_max.to_string(),
                d.label.clone(),
                crate::table::format_number(d.score),
            ])
            .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

const OUTLINE: [u8; 3] = [255, 0, 0];

/// Runs the detector on each image and draws accepted boxes on copies.
pub fn infer_image(
    images: &[FileArtifact],
    model_id: &str,
    client: &dyn DetectionClient,
) -> Result<ImageInference, InferError> {
    let mut out = ImageInference {
        annotated: Vec::with_capacity(images.len()),
        rows: Vec::new(),
        rejected: Vec::new(),
    };
    for art in images {
        let detections = client
            .detect(art, model_id)
            .map_err(|e| InferError::ClientUnavailable(e.to_string()))?;
        let mut img = pixels::decode(&art.bytes).map_err(|e| InferError::Image {
            name: art.name.clone(),
            reason: e.to_string(),
        })?;
        let (w, h) = (img.width(), img.height());
        let mut drawn = false;
        for d in detections {
            if let Some(reason) = d.problem(w, h) {
                out.rejected.push(Rejected {
                    image: art.name.clone(),
                    detection: d,
                    reason,
                });
                continue;
            }
            pixels::draw_outline(&mut img, d.pixel_box(), OUTLINE);
            drawn = true;
            out.rows.push((art.name.clone(), d));
        }
        out.annotated.push(if drawn {
            FileArtifact::new(art.name.clone(), pixels::encode_png(&img)).with_mime(crate::ingest::Mime::Png)
        } else {
            art.clone()
        });
    }
    Ok(out)
}
