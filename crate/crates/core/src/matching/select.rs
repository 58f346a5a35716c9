use std::cmp::Ordering;
use std::collections::HashMap;

use thiserror::Error;

use super::embed::{embed, EmbedError, Embedder, EmbeddingVector};
use super::greedy::{greedy_match, MatchResult, MatchStrategy};
use super::registry::{ModelDatabase, ModelDescriptor};
use super::similarity::similarity_matrix;
use crate::exec::Exec;
use crate::table::{TableError, TabularDataset};

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("registry has no table models")]
    NoTableModels,
    #[error("no model has every required header matched above {threshold}")]
    NoEligibleModel { threshold: f64 },
    #[error("dataset has no named columns")]
    NoHeaders,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// An eligible model together with how it matched.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub model: &'a ModelDescriptor,
    pub result: &'a MatchResult,
}

/// Picks the winner among eligible candidates.
///
/// Candidates arrive sorted by model id. Implementations return an index
/// into that slice; out-of-range answers fall back to the default ranking.
pub trait DescriptionRanker: Send + Sync {
    fn choose(&self, candidates: &[Candidate<'_>]) -> usize;
}

/// Highest mean similarity; then fewest required headers; then smallest id.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanSimilarityRanker;

fn default_order(a: &Candidate<'_>, b: &Candidate<'_>) -> Ordering {
    b.result
        .mean_similarity
        .total_cmp(&a.result.mean_similarity)
        .then(a.model.headers().len().cmp(&b.model.headers().len()))
        .then(a.model.id.cmp(&b.model.id))
}

impl DescriptionRanker for MeanSimilarityRanker {
    fn choose(&self, candidates: &[Candidate<'_>]) -> usize {
        (0..candidates.len())
            .min_by(|&i, &j| default_order(&candidates[i], &candidates[j]))
            .unwrap_or(0)
    }
}

/// Test double for a description-reading ranker: prefers ids in the given
/// order and otherwise defers to [`MeanSimilarityRanker`].
#[derive(Debug, Clone, Default)]
pub struct ScriptedRanker {
    pub preference: Vec<String>,
}

impl DescriptionRanker for ScriptedRanker {
    fn choose(&self, candidates: &[Candidate<'_>]) -> usize {
        self.preference
            .iter()
            .find_map(|id| candidates.iter().position(|c| &c.model.id == id))
            .unwrap_or_else(|| MeanSimilarityRanker.choose(candidates))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub model: ModelDescriptor,
    pub result: MatchResult,
    /// Dataset restricted to the assigned columns, renamed to the model's
    /// header names, in the model's header order.
    pub filtered: TabularDataset,
    /// Match results for every table model, in registry order.
    pub evaluated: Vec<MatchResult>,
}

pub struct MatchSettings<'a> {
    pub threshold: f64,
    pub strategy: MatchStrategy,
    pub ranker: &'a dyn DescriptionRanker,
    pub exec: Exec,
}

impl Default for MatchSettings<'_> {
    fn default() -> Self {
        Self {
            threshold: super::greedy::DEFAULT_SIMILARITY_THRESHOLD,
            strategy: MatchStrategy::PerField,
            ranker: &MeanSimilarityRanker,
            exec: Exec::default(),
        }
    }
}

/// Scores every table model against the dataset headers and returns the
/// winner with the filtered table.
pub fn select_model(
    table: &TabularDataset,
    registry: &ModelDatabase,
    embedder: &dyn Embedder,
    settings: &MatchSettings<'_>,
) -> Result<Selection, SelectError> {
    let models: Vec<&ModelDescriptor> = registry.table_models().collect();
    if models.is_empty() {
        return Err(SelectError::NoTableModels);
    }
    let headers = table.headers();
    // Blank headers cannot be embedded and never match.
    let usable: Vec<usize> = (0..headers.len())
        .filter(|&i| !headers[i].trim().is_empty())
        .collect();
    if usable.is_empty() {
        return Err(SelectError::NoHeaders);
    }

    let mut texts: Vec<String> = usable.iter().map(|&i| headers[i].trim().to_string()).collect();
    for m in &models {
        texts.extend(m.headers().iter().map(|h| h.trim().to_string()));
    }
    texts.sort();
    texts.dedup();
    let vectors = embed(&texts, embedder)?;
    let lookup: HashMap<&str, &EmbeddingVector> =
        texts.iter().map(String::as_str).zip(vectors.iter()).collect();

    let col_vecs: Vec<EmbeddingVector> = usable
        .iter()
        .map(|&i| lookup[headers[i].trim()].clone())
        .collect();
    let col_names: Vec<String> = usable.iter().map(|&i| headers[i].clone()).collect();

    let evaluated: Vec<MatchResult> = models
        .iter()
        .map(|m| {
            let req_vecs: Vec<EmbeddingVector> = m
                .headers()
                .iter()
                .map(|h| lookup[h.trim()].clone())
                .collect();
            let sims = similarity_matrix(&req_vecs, &col_vecs, settings.exec);
            greedy_match(&m.id, m.headers(), &col_names, &sims, settings.threshold, settings.strategy)
        })
        .collect();

    let mut candidates: Vec<Candidate<'_>> = models
        .iter()
        .zip(&evaluated)
        .filter(|(_, r)| r.eligible)
        .map(|(m, r)| Candidate { model: m, result: r })
        .collect();
    if candidates.is_empty() {
        return Err(SelectError::NoEligibleModel {
            threshold: settings.threshold,
        });
    }
    candidates.sort_by(|a, b| a.model.id.cmp(&b.model.id));
    let mut pick = settings.ranker.choose(&candidates);
    if pick >= candidates.len() {
        pick = MeanSimilarityRanker.choose(&candidates);
    }
    let winner = candidates[pick];
    let pairs: Vec<(String, String)> = winner
        .result
        .assignment
        .iter()
        .map(|a| (a.column.clone(), a.required.clone()))
        .collect();
    let filtered = table.select_renamed(&pairs)?;
    Ok(Selection {
        model: winner.model.clone(),
        result: winner.result.clone(),
        filtered,
        evaluated,
    })
}
