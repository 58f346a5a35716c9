use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use medpipe::ingest::{detect_mime, summarize_types, unpack_recursive, ArchiveLimits, FileArtifact, Mime};
use medpipe::matching::{ModelDatabase, ModelKind};
use medpipe::pipeline::{write_outputs, Engine, Outcome, PipelineContext, PlanDocument};
use medpipe::preprocess::{apply_edits, PlanEdit};

use crate::{settings, DetectArgs, PlanReviewArgs, RegistryArgs, RunArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_STAGE_FAILURE: u8 = 2;

fn read_inputs(paths: &[PathBuf]) -> Result<Vec<FileArtifact>> {
    paths
        .iter()
        .map(|p| FileArtifact::read(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

pub fn run(args: RunArgs) -> Result<u8> {
    let config = settings::resolve(&args)?;
    let inputs = read_inputs(&args.inputs)?;
    let out_dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("medpipe-out"));
    let seed = config.seed;
    let engine = Engine::from_config(config)?;
    let ctx = engine.run(PipelineContext::new(inputs, seed))?;
    let written = write_outputs(&ctx, &out_dir).with_context(|| format!("writing to {}", out_dir.display()))?;
    for e in &ctx.audit {
        eprintln!("[{}] {:?}: {}", e.stage, e.outcome, e.detail);
    }
    for p in &written {
        println!("{}", p.display());
    }
    // Exit status depends on the audit outcome alone.
    Ok(if ctx.audit.iter().any(|e| e.outcome == Outcome::Failed) {
        EXIT_STAGE_FAILURE
    } else {
        EXIT_OK
    })
}

pub fn plan_review(args: PlanReviewArgs) -> Result<u8> {
    let config = settings::load(args.config.config.as_deref())?;
    let text = std::fs::read_to_string(&args.plan).with_context(|| format!("reading {}", args.plan.display()))?;
    let doc = PlanDocument::from_json(&text).map_err(|e| anyhow::anyhow!("{}: {e}", args.plan.display()))?;
    let edits_text = std::fs::read_to_string(&args.edits).with_context(|| format!("reading {}", args.edits.display()))?;
    let edits: Vec<PlanEdit> = serde_json::from_str(&edits_text).with_context(|| format!("parsing {}", args.edits.display()))?;
    let plan = apply_edits(&doc.plan, &edits, &doc.metadata, &config.plan_config())?;
    // Fitted parameters belong to the old plan.
    let revised = PlanDocument {
        plan,
        metadata: doc.metadata,
        parameters: None,
    };
    match &args.out {
        Some(p) => std::fs::write(p, revised.to_json()).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", revised.to_json()),
    }
    Ok(EXIT_OK)
}

pub fn registry_validate(args: RegistryArgs) -> Result<u8> {
    let db = ModelDatabase::load(&args.path)?;
    let tables = db.models().iter().filter(|m| m.kind() == ModelKind::Table).count();
    println!(
        "{}: {} model(s), {} table, {} image",
        args.path.display(),
        db.models().len(),
        tables,
        db.models().len() - tables
    );
    for m in db.models() {
        match m.kind() {
            ModelKind::Table => println!("  {} [table] {}: {} header(s), output {}", m.id, m.modality, m.headers().len(), m.output().unwrap_or("")),
            ModelKind::Image => println!("  {} [image] {}: {}", m.id, m.modality, m.caption().unwrap_or("")),
        }
    }
    Ok(EXIT_OK)
}

pub fn detect_type(args: DetectArgs) -> Result<u8> {
    let mut all = Vec::new();
    for a in read_inputs(&args.paths)? {
        let mime = detect_mime(&a.bytes);
        println!("{}\t{}", a.name, mime.as_str());
        let a = a.with_mime(mime);
        if args.recursive && mime == Mime::Zip {
            let leaves = unpack_recursive(&a, ArchiveLimits::default())?;
            for l in &leaves {
                println!("  {}\t{}\tdepth={}", l.name, l.mime.map_or("", |m| m.as_str()), l.depth);
            }
            all.extend(leaves);
        } else {
            all.push(a);
        }
    }
    let summary = summarize_types(&all);
    if summary.total() == 0 {
        bail!("nothing classified");
    }
    println!("{}", serde_json::to_string(&summary)?);
    Ok(EXIT_OK)
}
