use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::anonymize::{MaskPolicy, MockRedactionClient};
use crate::http::check_url;
use crate::infer::{Detection, ExplainMethod, GbmConfig};
use crate::ingest::ArchiveLimits;
use crate::matching::{Classification, MatchStrategy, RouteThresholds, DEFAULT_SIMILARITY_THRESHOLD};
use crate::preprocess::{PlanConfig, PlanEdit, TypingThresholds, DEFAULT_SIZE_GATE_BYTES};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    #[default]
    Fallback,
    Remote { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VlmConfig {
    Mock {
        #[serde(default)]
        script: Vec<Classification>,
    },
    Remote { url: String },
}

impl Default for VlmConfig {
    fn default() -> Self {
        VlmConfig::Mock { script: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorConfig {
    Mock {
        #[serde(default)]
        detections: Vec<Detection>,
    },
    Remote { url: String },
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig::Mock { detections: Vec::new() }
    }
}

/// Image redaction service. With `none`, image runs fail at anonymization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RedactorConfig {
    #[default]
    None,
    Mock(MockRedactionClient),
    Remote { url: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    #[default]
    System,
    /// Epoch-based counter; makes the audit trail reproducible.
    Logical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub registry_path: Option<PathBuf>,
    pub embedder: EmbedderConfig,
    pub similarity_threshold: f64,
    pub match_strategy: MatchStrategy,
    pub size_gate_bytes: u64,
    pub force_auto: bool,
    pub one_hot_max_levels: usize,
    pub typing: TypingThresholds,
    /// Operator edits merged over the recommended plan.
    pub plan_edits: Vec<PlanEdit>,
    pub vlm: VlmConfig,
    pub route: RouteThresholds,
    pub detector: DetectorConfig,
    pub redactor: RedactorConfig,
    pub mask_policy: MaskPolicy,
    pub archive: ArchiveLimits,
    pub gbm: GbmConfig,
    pub explain: ExplainMethod,
    pub permutation_repeats: usize,
    /// Rows explained individually with Shapley values.
    pub explain_rows: usize,
    pub seed: u64,
    pub clock: ClockMode,
    pub output_dir: Option<PathBuf>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            registry_path: None,
            embedder: EmbedderConfig::Fallback,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            match_strategy: MatchStrategy::PerField,
            size_gate_bytes: DEFAULT_SIZE_GATE_BYTES,
            force_auto: false,
            one_hot_max_levels: 20,
            typing: TypingThresholds::default(),
            plan_edits: Vec::new(),
            vlm: VlmConfig::default(),
            route: RouteThresholds::default(),
            detector: DetectorConfig::default(),
            redactor: RedactorConfig::None,
            mask_policy: MaskPolicy::default(),
            archive: ArchiveLimits::default(),
            gbm: GbmConfig::default(),
            explain: ExplainMethod::Shapley,
            permutation_repeats: 5,
            explain_rows: 10,
            seed: 0,
            clock: ClockMode::System,
            output_dir: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), String> {
        let t = self.similarity_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(format!("similarity_threshold {t} not in (0,1]"));
        }
        for (name, url) in self.remote_urls() {
            check_url(url).map_err(|e| format!("{name}: {e}"))?;
        }
        for (name, v) in [("route.modality", self.route.modality), ("route.disease", self.route.disease)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} threshold {v} not in [0,1]"));
            }
        }
        if self.route.max_attempts == 0 {
            return Err("route.max_attempts must be at least 1".into());
        }
        if self.permutation_repeats == 0 {
            return Err("permutation_repeats must be at least 1".into());
        }
        self.gbm.validate()?;
        self.mask_policy.detector().map_err(|e| format!("mask_policy: {e}"))?;
        Ok(())
    }

    fn remote_urls(&self) -> Vec<(&'static str, &str)> {
        let mut out = Vec::new();
        if let EmbedderConfig::Remote { url } = &self.embedder {
            out.push(("embedder", url.as_str()));
        }
        if let VlmConfig::Remote { url } = &self.vlm {
            out.push(("vlm", url.as_str()));
        }
        if let DetectorConfig::Remote { url } = &self.detector {
            out.push(("detector", url.as_str()));
        }
        if let RedactorConfig::Remote { url } = &self.redactor {
            out.push(("redactor", url.as_str()));
        }
        out
    }

    pub fn plan_config(&self) -> PlanConfig {
        PlanConfig {
            size_gate_bytes: self.size_gate_bytes,
            force_auto: self.force_auto,
            one_hot_max_levels: self.one_hot_max_levels,
            typing: self.typing,
        }
    }
}
