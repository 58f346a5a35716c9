use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use super::audit::{append_audit, AuditEvent, Clock, LogicalClock, Outcome, StageId, SystemClock};
use super::config::{ClockMode, DetectorConfig, EmbedderConfig, EngineConfig, RedactorConfig, VlmConfig};
use super::context::{Anonymized, Headers, PipelineContext, RunMode, StageFailure};
use crate::anonymize::{mask_table, redact_image, RemoteRedactionClient, VisualRedactionClient};
use crate::digest::digest_json;
use crate::exec::Exec;
use crate::infer::{
    design_matrix, infer_image, permutation_importance, predict, shapley_summary, train_gbm, Attribution,
    DetectionClient, ExplainMethod, MockDetectionClient, RemoteDetectionClient, Task, MAX_EXACT_FEATURES,
};
use crate::ingest::{detect_mime, parse_tabular, summarize_types, unpack_recursive, FileArtifact, Mime};
use crate::matching::{
    route_image, select_model, Embedder, HashedTrigramEmbedder, MatchSettings, MeanSimilarityRanker, ModelDatabase,
    RegistryError, RemoteEmbedder, RemoteVlm, ScriptedVlm, VisionLanguageClient,
};
use crate::preprocess::{execute_plan, profile_columns, recommend, Step};

/// Errors raised before any stage runs.
#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("no input artifacts")]
    EmptyInput,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no registry configured")]
    NoRegistry,
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

/// Configured engine: registry, clients and clock.
pub struct Engine {
    pub config: EngineConfig,
    pub registry: ModelDatabase,
    pub embedder: Box<dyn Embedder>,
    pub vlm: Box<dyn VisionLanguageClient>,
    pub detector: Box<dyn DetectionClient>,
    pub redactor: Option<Box<dyn VisualRedactionClient>>,
    pub clock: Box<dyn Clock>,
    pub exec: Exec,
}

impl Engine {
    /// Builds clients from `config` around an already loaded registry.
    pub fn new(config: EngineConfig, registry: ModelDatabase) -> Result<Self, PipelineError> {
        config.validate().map_err(PipelineError::InvalidConfig)?;
        let embedder: Box<dyn Embedder> = match &config.embedder {
            EmbedderConfig::Fallback => Box::new(HashedTrigramEmbedder),
            EmbedderConfig::Remote { url } => Box::new(RemoteEmbedder::new(url.clone())),
        };
        let vlm: Box<dyn VisionLanguageClient> = match &config.vlm {
            VlmConfig::Mock { script } => Box::new(ScriptedVlm::new(script.clone())),
            VlmConfig::Remote { url } => Box::new(RemoteVlm { base_url: url.clone() }),
        };
        let detector: Box<dyn DetectionClient> = match &config.detector {
            DetectorConfig::Mock { detections } => Box::new(MockDetectionClient {
                detections: detections.clone(),
                offline: false,
            }),
            DetectorConfig::Remote { url } => Box::new(RemoteDetectionClient { base_url: url.clone() }),
        };
        let redactor: Option<Box<dyn VisualRedactionClient>> = match &config.redactor {
            RedactorConfig::None => None,
            RedactorConfig::Mock(m) => Some(Box::new(m.clone())),
            RedactorConfig::Remote { url } => Some(Box::new(RemoteRedactionClient { base_url: url.clone() })),
        };
        let clock: Box<dyn Clock> = match config.clock {
            ClockMode::System => Box::new(SystemClock::default()),
            ClockMode::Logical => Box::new(LogicalClock::default()),
        };
        Ok(Self {
            config,
            registry,
            embedder,
            vlm,
            detector,
            redactor,
            clock,
            exec: Exec::default(),
        })
    }

    /// Loads the registry named by `config.registry_path`.
    pub fn from_config(config: EngineConfig) -> Result<Self, PipelineError> {
        let path = config.registry_path.clone().ok_or(PipelineError::NoRegistry)?;
        let registry = ModelDatabase::load(&path)?;
        Self::new(config, registry)
    }

    pub fn run(&self, ctx: PipelineContext) -> Result<PipelineContext, PipelineError> {
        run_pipeline(ctx, self)
    }
}

/// Result of one stage: outcome, a readable detail, and the stage output
/// to digest.
struct StageResult {
    outcome: Outcome,
    detail: String,
    payload: serde_json::Value,
}

fn ok(detail: impl Into<String>, payload: serde_json::Value) -> Result<StageResult, String> {
    Ok(StageResult {
        outcome: Outcome::Ok,
        detail: detail.into(),
        payload,
    })
}

fn skipped(detail: &str) -> Result<StageResult, String> {
    Ok(StageResult {
        outcome: Outcome::Skipped,
        detail: detail.into(),
        payload: serde_json::Value::Null,
    })
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("stage output serializes")
}

/// Runs the seven stages in order, recording one audit event each. The
/// first failing stage ends the run; its cause is kept in `ctx.failure`.
pub fn run_pipeline(mut ctx: PipelineContext, engine: &Engine) -> Result<PipelineContext, PipelineError> {
    if ctx.input.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    engine.config.validate().map_err(PipelineError::InvalidConfig)?;
    for stage in StageId::ALL {
        let started_at = engine.clock.now();
        let result = match stage {
            StageId::IngestionClassifier => classify(&mut ctx, engine),
            StageId::IngestionAnonymizer => anonymize(&mut ctx, engine),
            StageId::IngestionSelector => extract(&mut ctx, engine),
            StageId::IngestionFeatureMatcher => match_model(&mut ctx, engine),
            StageId::PreprocessingRecommender => recommend_plan(&mut ctx, engine),
            StageId::PreprocessingImplementor => implement_plan(&mut ctx, engine),
            StageId::ModelInferencer => infer(&mut ctx, engine),
        };
        let ended_at = engine.clock.now();
        let (outcome, detail, payload) = match result {
            Ok(r) => (r.outcome, r.detail, r.payload),
            Err(cause) => {
                ctx.failure = Some(StageFailure {
                    stage,
                    cause: cause.clone(),
                });
                (Outcome::Failed, cause.clone(), json!({ "error": cause }))
            }
        };
        let event = AuditEvent {
            stage,
            started_at,
            ended_at,
            outcome,
            detail,
            payload_digest: digest_json(&payload),
        };
        append_audit(&mut ctx.audit, event).expect("stages are recorded in canonical order");
        if outcome == Outcome::Failed {
            break;
        }
    }
    debug_assert!(ctx.is_monotone());
    Ok(ctx)
}

fn classify(ctx: &mut PipelineContext, engine: &Engine) -> Result<StageResult, String> {
    let mut leaves = Vec::new();
    for a in &ctx.input {
        let mime = detect_mime(&a.bytes);
        let a = a.clone().with_mime(mime);
        if mime == Mime::Zip {
            leaves.extend(unpack_recursive(&a, engine.config.archive).map_err(|e| e.to_string())?);
        } else {
            leaves.push(a);
        }
    }
    let summary = summarize_types(&leaves);
    let tabular: Vec<&FileArtifact> = leaves.iter().filter(|l| l.mime.is_some_and(|m| m.is_tabular())).collect();
    let images: Vec<&FileArtifact> = leaves.iter().filter(|l| l.mime.is_some_and(|m| m.is_image())).collect();
    let mut notes = Vec::new();
    let mode = match (tabular.len(), images.len()) {
        (1, n) => {
            if n > 0 {
                notes.push(format!("{n} image(s) ignored in tabular mode"));
            }
            RunMode::Tabular
        }
        (0, n) if n > 0 => RunMode::Image,
        (0, _) => return Err("no tabular or image data found".into()),
        (k, _) => return Err(format!("{k} tabular files found; a run takes exactly one dataset")),
    };
    let excluded = leaves.len() - tabular.len() - images.len();
    if excluded > 0 {
        notes.push(format!("{excluded} unsupported file(s) excluded"));
    }
    if mode == RunMode::Tabular {
        let t = parse_tabular(tabular[0]).map_err(|e| format!("{}: {e}", tabular[0].name))?;
        ctx.dataset_bytes = tabular[0].bytes.len() as u64;
        ctx.dataset = Some(t);
    }
    let payload = json!({
        "mode": mode,
        "summary": summary,
        "leaves": leaves,
    });
    let detail = format!(
        "{} file(s) classified: {}; mode {:?}{}",
        summary.total(),
        summary
            .entries
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .chain((summary.unknown_count > 0).then(|| format!("unknown={}", summary.unknown_count)))
            .collect::<Vec<_>>()
            .join(", "),
        mode,
        notes.iter().map(|n| format!("; {n}")).collect::<String>()
    );
    ctx.leaves = leaves;
    ctx.type_summary = Some(summary);
    ctx.mode = Some(mode);
    ok(detail, payload)
}

fn image_leaves(ctx: &PipelineContext) -> Vec<FileArtifact> {
    ctx.leaves
        .iter()
        .filter(|l| l.mime.is_some_and(|m| m.is_image()))
        .cloned()
        .collect()
}

fn anonymize(ctx: &mut PipelineContext, engine: &Engine) -> Result<StageResult, String> {
    match ctx.mode.expect("mode set by classifier") {
        RunMode::Tabular => {
            let detector = engine.config.mask_policy.detector().map_err(|e| e.to_string())?;
            let table = ctx.dataset.as_ref().expect("table parsed by classifier");
            let out = mask_table(table, &detector, engine.config.mask_policy.granularity, engine.exec);
            let detail = format!("{} PII finding(s) masked", out.findings.len());
            let payload = json!({ "table": out.table, "findings": out.findings });
            ctx.anonymized = Some(Anonymized::Table {
                table: out.table,
                findings: out.findings,
            });
            ok(detail, payload)
        }
        RunMode::Image => {
            let Some(client) = engine.redactor.as_deref() else {
                return Err("no image redaction client configured; refusing to pass unredacted images".into());
            };
            let images = image_leaves(ctx);
            let redacted = images
                .iter()
                .map(|i| redact_image(i, client))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            let changed = redacted.iter().zip(&images).filter(|(a, b)| a.bytes != b.bytes).count();
            let payload = to_value(&redacted);
            ctx.anonymized = Some(Anonymized::Images(redacted));
            ok(format!("{} image(s) checked, {changed} redacted", images.len()), payload)
        }
    }
}

fn extract(ctx: &mut PipelineContext, engine: &Engine) -> Result<StageResult, String> {
    match ctx.anonymized.as_ref().expect("anonymizer ran") {
        Anonymized::Table { table, .. } => {
            let headers = Headers::Columns(table.headers());
            let payload = to_value(&headers);
            ctx.headers = Some(headers);
            ok(format!("{} header(s) extracted", table.n_cols()), payload)
        }
        Anonymized::Images(images) => {
            let route = route_image(images, &engine.registry, engine.vlm.as_ref(), engine.config.route, engine.config.seed)
                .map_err(|e| e.to_string())?;
            let headers = Headers::Image {
                modality: route.modality.clone(),
                disease: route.disease.clone(),
            };
            let detail = format!(
                "modality `{}` ({:.3}), disease `{}` ({:.3}) from {} after {} attempt(s)",
                route.modality, route.confidences.modality, route.disease, route.confidences.disease, route.image, route.attempts
            );
            let payload = json!({ "headers": headers, "route": route });
            ctx.headers = Some(headers);
            ctx.route = Some(route);
            ok(detail, payload)
        }
    }
}

fn match_model(ctx: &mut PipelineContext, engine: &Engine) -> Result<StageResult, String> {
    match ctx.mode.expect("mode set") {
        RunMode::Tabular => {
            if let EmbedderConfig::Remote { url } = &engine.config.embedder {
                RemoteEmbedder::new(url.clone()).verify().map_err(|e| e.to_string())?;
            }
            let Some(Anonymized::Table { table, .. }) = &ctx.anonymized else {
                unreachable!("tabular mode has a masked table")
            };
            let settings = MatchSettings {
                threshold: engine.config.similarity_threshold,
                strategy: engine.config.match_strategy,
                ranker: &MeanSimilarityRanker,
                exec: engine.exec,
            };
            let sel = select_model(table, &engine.registry, engine.embedder.as_ref(), &settings).map_err(|e| e.to_string())?;
            let detail = format!(
                "selected {} (mean similarity {:.4}) among {} table model(s)",
                sel.model.id,
                sel.result.mean_similarity,
                sel.evaluated.len()
            );
            let payload = json!({
                "model": sel.model,
                "assignment": sel.result,
                "filtered": sel.filtered,
            });
            ctx.selected_model = Some(sel.model);
            ctx.match_results = sel.evaluated;
            ctx.filtered_dataset = Some(sel.filtered);
            ok(detail, payload)
        }
        RunMode::Image => {
            let route = ctx.route.as_ref().expect("router ran");
            let model = engine
                .registry
                .get(&route.model_id)
                .cloned()
                .ok_or_else(|| format!("routed model {} vanished from the registry", route.model_id))?;
            let payload = to_value(&model);
            let detail = format!("selected {} for `{}` / `{}`", model.id, route.modality, route.disease);
            ctx.selected_model = Some(model);
            ok(detail, payload)
        }
    }
}

fn recommend_plan(ctx: &mut PipelineContext, engine: &Engine) -> Result<StageResult, String> {
    if ctx.mode == Some(RunMode::Image) {
        return skipped("image preprocessing belongs to the inference backend");
    }
    let table = ctx.filtered_dataset.as_ref().expect("matcher ran");
    let model = ctx.selected_model.as_ref().expect("matcher ran");
    let metas = profile_columns(table, engine.exec).map_err(|e| e.to_string())?;
    let edits = (!engine.config.plan_edits.is_empty()).then_some(engine.config.plan_edits.as_slice());
    let plan = recommend(&metas, model.output(), ctx.dataset_bytes, edits, &engine.config.plan_config())
        .map_err(|e| e.to_string())?;
    let drops: Vec<&str> = plan
        .steps
        .iter()
        .filter(|s| matches!(s.step, Step::Drop { .. }))
        .map(|s| s.column.as_str())
        .collect();
    let mut detail = format!("{:?} plan with {} step(s) over {} column(s)", plan.mode, plan.steps.len(), plan.columns.len());
    if !drops.is_empty() {
        detail.push_str(&format!("; dropped: {}", drops.join(", ")));
    }
    let payload = json!({ "metadata": metas, "plan": plan });
    ctx.metadata = metas;
    ctx.plan = Some(plan);
    ok(detail, payload)
}

fn implement_plan(ctx: &mut PipelineContext, engine: &Engine) -> Result<StageResult, String> {
    if ctx.mode == Some(RunMode::Image) {
        return skipped("image preprocessing belongs to the inference backend");
    }
    let table = ctx.filtered_dataset.as_ref().expect("matcher ran");
    let plan = ctx.plan.as_ref().expect("recommender ran");
    let (processed, params) = execute_plan(table, plan, engine.exec).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} step(s) applied; {} row(s) x {} column(s)",
        params.steps.len(),
        processed.n_rows(),
        processed.n_cols()
    );
    let payload = json!({ "processed": processed, "parameters": params });
    ctx.processed = Some(processed);
    ctx.transform_params = Some(params);
    ok(detail, payload)
}

fn infer(ctx: &mut PipelineContext, engine: &Engine) -> Result<StageResult, String> {
    if ctx.mode == Some(RunMode::Image) {
        let model = ctx.selected_model.as_ref().expect("matcher ran");
        let Some(Anonymized::Images(images)) = &ctx.anonymized else {
            unreachable!("image mode has redacted images")
        };
        let out = infer_image(images, &model.id, engine.detector.as_ref()).map_err(|e| e.to_string())?;
        let mut detail = format!("{} detection(s) on {} image(s)", out.rows.len(), images.len());
        for r in &out.rejected {
            detail.push_str(&format!("; rejected box on {}: {}", r.image, r.reason));
        }
        let payload = json!({
            "csv": String::from_utf8_lossy(&out.to_csv()),
            "annotated": out.annotated,
            "rejected": out.rejected,
        });
        ctx.image_output = Some(out);
        return ok(detail, payload);
    }

    let cfg = &engine.config;
    let table = ctx.processed.as_ref().expect("implementor ran");
    let plan = ctx.plan.as_ref().expect("recommender ran");
    let target = plan.target.clone().ok_or("plan has no target column")?;
    // A target mapped onto {0,1} is a classification target.
    let binary = plan
        .steps
        .iter()
        .any(|s| s.column == target && matches!(s.step, Step::MapBinary { .. }));
    let task = if binary { Task::BinaryClassification } else { Task::Regression };
    let features: Vec<String> = table.headers().into_iter().filter(|h| *h != target).collect();
    let gbm = crate::infer::GbmConfig { seed: cfg.seed, ..cfg.gbm };
    let trained = train_gbm(table, &target, &features, task, &gbm, engine.exec).map_err(|e| e.to_string())?;
    let mut notes = vec![format!(
        "{:?} on {} feature(s), {} tree(s); split {}/{} (seed {})",
        task,
        features.len(),
        trained.model.trees.len(),
        trained.train_rows.len(),
        trained.holdout_rows.len(),
        cfg.seed
    )];
    if ctx.dataset_bytes > cfg.size_gate_bytes {
        notes.push("large dataset: boosted trees used (no alternative backend)".into());
    }
    let holdout = table.take_rows(&trained.holdout_rows);
    let mut report = predict(&trained.model, &holdout, engine.exec).map_err(|e| e.to_string())?;

    let x_all = design_matrix(table, &features).map_err(|e| e.to_string())?;
    let mut method = cfg.explain;
    if method == ExplainMethod::Shapley && features.len() > MAX_EXACT_FEATURES {
        notes.push(format!(
            "{} features exceed the exact Shapley bound; using permutation importance",
            features.len()
        ));
        method = ExplainMethod::Permutation;
    }
    match method {
        ExplainMethod::Shapley => {
            let background: Vec<Vec<f64>> = trained.train_rows.iter().take(64).map(|&r| x_all[r].clone()).collect();
            let explained: Vec<usize> = (0..trained.holdout_rows.len()).take(cfg.explain_rows).collect();
            let rows: Vec<Vec<f64>> = explained.iter().map(|&i| x_all[trained.holdout_rows[i]].clone()).collect();
            let (phis, ranking) =
                shapley_summary(&trained.model, &features, &rows, &background, engine.exec).map_err(|e| e.to_string())?;
            report.attributions = Some(
                explained
                    .into_iter()
                    .zip(phis)
                    .map(|(row, values)| Attribution { row, values })
                    .collect(),
            );
            report.set_top_features(&ranking);
        }
        ExplainMethod::Permutation => {
            let xh: Vec<Vec<f64>> = trained.holdout_rows.iter().map(|&r| x_all[r].clone()).collect();
            let y = crate::infer::design_matrix(&holdout, std::slice::from_ref(&target)).map_err(|e| e.to_string())?;
            let y: Vec<f64> = y.into_iter().map(|r| r[0]).collect();
            let ranking = permutation_importance(&trained.model, &xh, &y, cfg.permutation_repeats, cfg.seed, engine.exec);
            report.set_top_features(&ranking);
        }
        ExplainMethod::Off => {}
    }
    report.relabel_rows(&trained.holdout_rows);
    notes.push(format!(
        "holdout loss {:.6}; top features: {}",
        trained.final_holdout_loss(),
        report.top_features.iter().map(|f| f.feature.as_str()).collect::<Vec<_>>().join(", ")
    ));
    let payload = json!({ "model": trained.model, "report": report });
    ctx.trained = Some(trained);
    ctx.report = Some(report);
    ok(notes.join("; "), payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::ModelDescriptor;

    fn toy_csv() -> FileArtifact {
        let mut s = String::from("age,gender,ECOG,living_situation,anxiety,notes\n");
        for i in 0..60 {
            s.push_str(&format!(
                "{},{},{},{},{},seen by dr on visit {i}\n",
                40 + i % 37,
                ["F", "M"][i % 2],
                i % 5,
                ["alone", "family", "care home"][i % 3],
                usize::from(i % 5 >= 3)
            ));
        }
        FileArtifact::new("toy.csv", s.into_bytes())
    }

    fn registry() -> ModelDatabase {
        ModelDatabase::from_models(vec![
            ModelDescriptor::table(
                "MODEL_01",
                "anxiety prediction",
                &["age", "gender", "ECOG", "living_situation", "anxiety"],
                "anxiety",
            ),
            ModelDescriptor::image("MODEL_02", "colon colonoscopy scan", "polyps"),
            ModelDescriptor::table("MODEL_03", "falls", &["gait_speed", "falls"], "falls"),
        ])
        .unwrap()
    }

    fn engine() -> Engine {
        Engine::new(
            EngineConfig {
                clock: ClockMode::Logical,
                ..Default::default()
            },
            registry(),
        )
        .unwrap()
    }

    #[test]
    fn toy_run_has_seven_ok_events() {
        let ctx = run_pipeline(PipelineContext::new(vec![toy_csv()], 0), &engine()).unwrap();
        assert!(ctx.failure.is_none(), "{:?}", ctx.failure);
        let stages: Vec<StageId> = ctx.audit.iter().map(|e| e.stage).collect();
        assert_eq!(stages, StageId::ALL);
        assert!(ctx.audit.iter().all(|e| e.outcome == Outcome::Ok));
        assert_eq!(ctx.selected_model.unwrap().id, "MODEL_01");
        assert!(ctx.report.unwrap().top_features.len() <= 10);
    }

    #[test]
    fn empty_input_is_precondition() {
        assert_eq!(
            run_pipeline(PipelineContext::new(vec![], 0), &engine()).unwrap_err(),
            PipelineError::EmptyInput
        );
    }

    #[test]
    fn no_eligible_model_fails_at_matcher() {
        let reg = ModelDatabase::from_models(vec![ModelDescriptor::table("X", "x", &["zzz", "qqq"], "qqq")]).unwrap();
        let e = Engine::new(EngineConfig::default(), reg).unwrap();
        let ctx = run_pipeline(PipelineContext::new(vec![toy_csv()], 0), &e).unwrap();
        let outcomes: Vec<Outcome> = ctx.audit.iter().map(|e| e.outcome).collect();
        assert_eq!(outcomes, vec![Outcome::Ok, Outcome::Ok, Outcome::Ok, Outcome::Failed]);
        assert_eq!(ctx.failure.as_ref().unwrap().stage, StageId::IngestionFeatureMatcher);
        assert!(ctx.is_monotone() && ctx.plan.is_none());
    }
}
