use serde::{Deserialize, Serialize};

/// Default minimum similarity for a header pair to count as a match.
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStrategy {
    /// Walk required headers in registry order; each takes its best free
    /// column.
    #[default]
    PerField,
    /// Repeatedly take the best free pair across the whole matrix.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeaderAssignment {
    pub required: String,
    pub column: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub model_id: String,
    /// Assigned pairs in required-header order.
    pub assignment: Vec<HeaderAssignment>,
    pub mean_similarity: f64,
    pub eligible: bool,
}

/// Index-level greedy assignment over a `required x dataset` similarity
/// matrix. Returns, per required row, the assigned column and its score.
/// Only scores strictly above `threshold` are used, and no column is used
/// twice. Ties go to the lower index.
pub fn assign(sims: &[Vec<f64>], threshold: f64, strategy: MatchStrategy) -> Vec<Option<(usize, f64)>> {
    let n_cols = sims.first().map_or(0, Vec::len);
    let mut used = vec![false; n_cols];
    let mut out = vec![None; sims.len()];
    match strategy {
        MatchStrategy::PerField => {
            for (r, row) in sims.iter().enumerate() {
                let mut best: Option<(usize, f64)> = None;
                for (c, &s) in row.iter().enumerate() {
                    if used[c] || !(s > threshold) {
                        continue;
                    }
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((c, s));
                    }
                }
                if let Some((c, s)) = best {
                    used[c] = true;
                    out[r] = Some((c, s));
                }
            }
        }
        MatchStrategy::Global => {
            let mut pairs: Vec<(usize, usize, f64)> = sims
                .iter()
                .enumerate()
                .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &s)| (r, c, s)))
                .filter(|&(_, _, s)| s > threshold)
                .collect();
            pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
            for (r, c, s) in pairs {
                if out[r].is_none() && !used[c] {
                    used[c] = true;
                    out[r] = Some((c, s));
                }
            }
        }
    }
    out
}

/// Matches a model's required headers to dataset columns.
///
/// `sims[i][j]` is the similarity of required header `i` to dataset header
/// `j`. Ineligibility is a value, not an error.
pub fn greedy_match(
    model_id: &str,
    required: &[String],
    dataset_headers: &[String],
    sims: &[Vec<f64>],
    threshold: f64,
    strategy: MatchStrategy,
) -> MatchResult {
    debug_assert_eq!(sims.len(), required.len());
    let picks = assign(sims, threshold, strategy);
    let assignment: Vec<HeaderAssignment> = picks
        .iter()
        .enumerate()
        .filter_map(|(r, p)| {
            p.map(|(c, score)| HeaderAssignment {
                required: required[r].clone(),
                column: dataset_headers[c].clone(),
                score,
            })
        })
        .collect();
    let mean_similarity = if assignment.is_empty() {
        0.0
    } else {
        assignment.iter().map(|a| a.score).sum::<f64>() / assignment.len() as f64
    };
    MatchResult {
        model_id: model_id.to_string(),
        eligible: !required.is_empty() && assignment.len() == required.len(),
        assignment,
        mean_similarity,
    }
}
