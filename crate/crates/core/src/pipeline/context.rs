use serde::Serialize;

use super::audit::{AuditEvent, Outcome, StageId};
use crate::anonymize::PiiFinding;
use crate::digest::sha256_hex;
use crate::infer::{ImageInference, PredictionReport, RetrainReport, TrainedModel};
use crate::ingest::{FileArtifact, TypeSummary};
use crate::matching::{ImageRoute, MatchResult, ModelDescriptor};
use crate::preprocess::{ColumnMetadata, PreprocessingPlan, TransformParams};
use crate::table::TabularDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Tabular,
    Image,
}

/// Output of the anonymizer.
#[derive(Debug, Clone, PartialEq)]
pub enum Anonymized {
    Table {
        table: TabularDataset,
        findings: Vec<PiiFinding>,
    },
    Images(Vec<FileArtifact>),
}

/// What the matcher keys on: column names, or modality and disease.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Headers {
    Columns(Vec<String>),
    Image { modality: String, disease: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageFailure {
    pub stage: StageId,
    pub cause: String,
}

/// State handed from stage to stage.
#[derive(Debug, Clone, Default)]
pub struct PipelineContext {
    pub run_id: String,
    pub input: Vec<FileArtifact>,
    pub mode: Option<RunMode>,
    /// Classified leaves after archive expansion, all MIMEs.
    pub leaves: Vec<FileArtifact>,
    pub type_summary: Option<TypeSummary>,
    /// Parsed table in tabular mode, before masking.
    pub dataset: Option<TabularDataset>,
    /// Serialized size of the tabular input, for the size gate.
    pub dataset_bytes: u64,
    pub anonymized: Option<Anonymized>,
    pub headers: Option<Headers>,
    pub route: Option<ImageRoute>,
    pub selected_model: Option<ModelDescriptor>,
    pub match_results: Vec<MatchResult>,
    pub filtered_dataset: Option<TabularDataset>,
    pub metadata: Vec<ColumnMetadata>,
    pub plan: Option<PreprocessingPlan>,
    pub processed: Option<TabularDataset>,
    pub transform_params: Option<TransformParams>,
    pub trained: Option<TrainedModel>,
    pub report: Option<PredictionReport>,
    pub retrain: Option<RetrainReport>,
    pub image_output: Option<ImageInference>,
    pub audit: Vec<AuditEvent>,
    pub failure: Option<StageFailure>,
}

impl PipelineContext {
    /// A fresh context whose run id is derived from the seed and the
    /// input bytes, so identical runs share an id.
    pub fn new(input: Vec<FileArtifact>, seed: u64) -> Self {
        let mut material = seed.to_le_bytes().to_vec();
        for a in &input {
            material.extend_from_slice(sha256_hex(&a.bytes).as_bytes());
        }
        let run_id = sha256_hex(&material)[..16].to_string();
        Self {
            run_id,
            input,
            ..Default::default()
        }
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
            && self.audit.len() == StageId::ALL.len()
            && self.audit.iter().all(|e| e.outcome != Outcome::Failed)
    }

    pub fn findings(&self) -> &[PiiFinding] {
        match &self.anonymized {
            Some(Anonymized::Table { findings, .. }) => findings,
            _ => &[],
        }
    }

    /// Whether each stage's output is present, in canonical order.
    /// Preprocessing outputs count as present in image mode, where those
    /// stages are skipped.
    pub fn outputs_present(&self) -> [bool; 7] {
        let image = self.mode == Some(RunMode::Image);
        [
            self.mode.is_some(),
            self.anonymized.is_some(),
            self.headers.is_some(),
            self.selected_model.is_some(),
            self.plan.is_some() || (image && self.selected_model.is_some()),
            self.processed.is_some() || (image && self.selected_model.is_some()),
            self.report.is_some() || self.image_output.is_some(),
        ]
    }

    /// No stage output exists unless every earlier one does.
    pub fn is_monotone(&self) -> bool {
        let p = self.outputs_present();
        p.windows(2).all(|w| w[0] || !w[1])
    }
}
