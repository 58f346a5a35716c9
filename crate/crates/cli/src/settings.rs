use std::path::Path;

use anyhow::{Context, Result};

use medpipe::pipeline::{ClockMode, EmbedderConfig, EngineConfig};

use crate::RunArgs;

/// Config from the TOML file, if any.
pub fn load(path: Option<&Path>) -> Result<EngineConfig> {
    let Some(path) = path else {
        return Ok(EngineConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Defaults, then the config file, then flags.
pub fn resolve(args: &RunArgs) -> Result<EngineConfig> {
    let mut c = load(args.config.config.as_deref())?;
    if let Some(r) = &args.registry {
        c.registry_path = Some(r.clone());
    }
    if let Some(e) = &args.embedder {
        c.embedder = if e == "fallback" {
            EmbedderConfig::Fallback
        } else {
            EmbedderConfig::Remote { url: e.clone() }
        };
    }
    if let Some(t) = args.threshold {
        c.similarity_threshold = t;
    }
    if let Some(s) = args.seed {
        c.seed = s;
        c.clock = ClockMode::Logical;
    }
    if let Some(o) = &args.out {
        c.output_dir = Some(o.clone());
    }
    if args.auto {
        c.force_auto = true;
    }
    if let Some(e) = args.explain {
        c.explain = e.into();
    }
    if let Some(p) = &args.edits {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading edits {}", p.display()))?;
        c.plan_edits = serde_json::from_str(&text).with_context(|| format!("parsing edits {}", p.display()))?;
    }
    c.validate().map_err(|e| anyhow::anyhow!("invalid configuration: {e}"))?;
    Ok(c)
}
