use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::audit::audit_jsonl;
use super::context::{Anonymized, PipelineContext};
use crate::anonymize::findings_jsonl;
use crate::preprocess::{ColumnMetadata, PreprocessingPlan, TransformParams};

pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const AUDIT_FILE: &str = "audit.jsonl";
pub const PLAN_FILE: &str = "plan.json";
pub const FINDINGS_FILE: &str = "findings.jsonl";
pub const DETECTIONS_FILE: &str = "detections.csv";
pub const ANNOTATED_DIR: &str = "annotated";

/// Plan, column metadata and fitted parameters as one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub plan: PreprocessingPlan,
    #[serde(default)]
    pub metadata: Vec<ColumnMetadata>,
    #[serde(default)]
    pub parameters: Option<TransformParams>,
}

impl PlanDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes") + "\n"
    }

    /// Accepts a full document or a bare plan.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let doc = if value.get("plan").is_some() {
            serde_json::from_value(value).map_err(|e| e.to_string())?
        } else {
            PlanDocument {
                plan: serde_json::from_value(value).map_err(|e| e.to_string())?,
                metadata: Vec::new(),
                parameters: None,
            }
        };
        doc.plan.validate().map_err(|e| e.to_string())?;
        Ok(doc)
    }
}

pub fn plan_document(ctx: &PipelineContext) -> Option<PlanDocument> {
    Some(PlanDocument {
        plan: ctx.plan.clone()?,
        metadata: ctx.metadata.clone(),
        parameters: ctx.transform_params.clone(),
    })
}

fn safe_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

/// Writes every artifact the run produced into `dir` and returns the
/// paths written. The audit trail is always written.
pub fn write_outputs(ctx: &PipelineContext, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> io::Result<()> {
        let p = dir.join(name);
        fs::write(&p, bytes)?;
        written.push(p);
        Ok(())
    };
    put(AUDIT_FILE, audit_jsonl(&ctx.audit).as_bytes())?;
    if matches!(ctx.anonymized, Some(Anonymized::Table { .. })) {
        put(FINDINGS_FILE, findings_jsonl(ctx.findings()).as_bytes())?;
    }
    if let Some(doc) = plan_document(ctx) {
        put(PLAN_FILE, doc.to_json().as_bytes())?;
    }
    if let Some(report) = &ctx.report {
        put(PREDICTIONS_FILE, &report.to_csv())?;
    }
    if let Some(out) = &ctx.image_output {
        put(DETECTIONS_FILE, &out.to_csv())?;
        let sub = dir.join(ANNOTATED_DIR);
        fs::create_dir_all(&sub)?;
        for a in &out.annotated {
            let p = sub.join(safe_name(&a.name));
            fs::write(&p, &a.bytes)?;
            written.push(p);
        }
    }
    Ok(written)
}
