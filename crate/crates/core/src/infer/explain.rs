use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gbm::{mean_loss, BoostedModel, MarginModel};
use super::InferError;
use crate::exec::Exec;

/// Largest feature count for exact enumeration.
pub const MAX_EXACT_FEATURES: usize = 12;
/// Number of features reported as most influential.
pub const TOP_FEATURES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainMethod {
    #[default]
    Shapley,
    Permutation,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    pub score: f64,
}

/// Exact Shapley values of `model` at `row` in margin space.
///
/// The value of a coalition is the mean model output with coalition
/// features taken from `row` and the rest from each background row.
pub fn shapley_exact(
    model: &dyn MarginModel,
    row: &[f64],
    background: &[Vec<f64>],
    exec: Exec,
) -> Result<Vec<f64>, InferError> {
    let n = model.n_features();
    if n > MAX_EXACT_FEATURES {
        return Err(InferError::TooManyFeatures { n, max: MAX_EXACT_FEATURES });
    }
    if background.is_empty() {
        return Err(InferError::EmptyBackground);
    }
    if row.len() != n || background.iter().any(|b| b.len() != n) {
        return Err(InferError::ShapeMismatch);
    }
    let masks = 1usize << n;
    let value = model
        .coalition_values(row, background, exec)
        .unwrap_or_else(|| brute_force_values(model, row, background, exec));
    // w[s] = s!(n-s-1)!/n!
    let mut fact = vec![1.0f64; n + 1];
    for i in 1..=n {
        fact[i] = fact[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..n).map(|s| fact[s] * fact[n - s - 1] / fact[n]).collect();
    Ok((0..n)
        .map(|i| {
            let bit = 1usize << i;
            (0..masks)
                .filter(|m| m & bit == 0)
                .map(|m| weight[m.count_ones() as usize] * (value[m | bit] - value[m]))
                .sum()
        })
        .collect())
}

fn brute_force_values(model: &dyn MarginModel, row: &[f64], background: &[Vec<f64>], exec: Exec) -> Vec<f64> {
    let n = row.len();
    exec.map_range(1usize << n, |mask| {
        let mut x = vec![0.0; n];
        let mut total = 0.0;
        for b in background {
            for j in 0..n {
                x[j] = if mask >> j & 1 == 1 { row[j] } else { b[j] };
            }
            total += model.margin(&x);
        }
        total / background.len() as f64
    })
}

fn predictions(model: &BoostedModel, x: &[Vec<f64>]) -> Vec<f64> {
    x.iter().map(|r| model.margin(r)).collect()
}

/// Mean loss increase after shuffling each feature, over `repeats`
/// shuffles, sorted descending (ties by feature order).
pub fn permutation_importance(
    model: &BoostedModel,
    x: &[Vec<f64>],
    y: &[f64],
    repeats: usize,
    seed: u64,
    exec: Exec,
) -> Vec<FeatureScore> {
    let base = mean_loss(model.task, &predictions(model, x), y);
    let repeats = repeats.max(1);
    let scores = exec.map_range(model.feature_names.len(), |j| {
        let mut total = 0.0;
        for r in 0..repeats {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((j as u64) << 32) ^ r as u64);
            let mut col: Vec<f64> = x.iter().map(|row| row[j]).collect();
            col.shuffle(&mut rng);
            let mut xp = x.to_vec();
            for (row, v) in xp.iter_mut().zip(col) {
                row[j] = v;
            }
            total += mean_loss(model.task, &predictions(model, &xp), y) - base;
        }
        total / repeats as f64
    });
    rank(&model.feature_names, &scores)
}

/// Descending by score; equal scores keep feature order.
pub fn rank(features: &[String], scores: &[f64]) -> Vec<FeatureScore> {
    let mut out: Vec<FeatureScore> = features
        .iter()
        .zip(scores)
        .map(|(f, &s)| FeatureScore { feature: f.clone(), score: s })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

/// Shapley values for each of `rows` plus the mean-|phi| ranking.
pub fn shapley_summary(
    model: &dyn MarginModel,
    features: &[String],
    rows: &[Vec<f64>],
    background: &[Vec<f64>],
    exec: Exec,
) -> Result<(Vec<Vec<f64>>, Vec<FeatureScore>), InferError> {
    let phis: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| shapley_exact(model, r, background, exec))
        .collect::<Result<_, _>>()?;
    let mut mean_abs = vec![0.0; features.len()];
    for phi in &phis {
        for (m, p) in mean_abs.iter_mut().zip(phi) {
            *m += p.abs() / phis.len().max(1) as f64;
        }
    }
    Ok((phis, rank(features, &mean_abs)))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear(Vec<f64>);
    impl MarginModel for Linear {
        fn n_features(&self) -> usize {
            self.0.len()
        }
        fn margin(&self, x: &[f64]) -> f64 {
            self.0.iter().zip(x).map(|(w, v)| w * v).sum()
        }
    }

    #[test]
    fn linear_model_closed_form() {
        // For a linear model phi_i = w_i (x_i - mean background x_i).
        let m = Linear(vec![2.0, -1.0, 0.0]);
        let bg = vec![vec![0.0, 1.0, 5.0], vec![2.0, 3.0, 7.0]];
        let phi = shapley_exact(&m, &[3.0, 0.0, 1.0], &bg, Exec::Sequential).unwrap();
        assert!((phi[0] - 4.0).abs() < 1e-12);
        assert!((phi[1] - 2.0).abs() < 1e-12);
        assert_eq!(phi[2], 0.0);
    }

    #[test]
    fn tree_shortcut_matches_enumeration() {
        use crate::infer::gbm::{Node, Tree};
        let split = |feature, threshold, l, r| Tree {
            nodes: vec![
                Node::Split { feature, threshold, left: 1, right: 2 },
                Node::Leaf { value: l },
                Node::Leaf { value: r },
            ],
        };
        let m = BoostedModel {
            trees: vec![split(0, 0.5, -1.0, 2.0), split(2, 0.1, 0.3, -0.7), split(0, 0.2, 1.5, 0.0)],
            learning_rate: 0.3,
            base_score: 0.25,
            feature_names: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            target: "y".into(),
            task: crate::infer::Task::Regression,
        };
        let row = [0.9, 3.0, -1.0, 0.0];
        let bg = vec![vec![0.0, 1.0, 1.0, 4.0], vec![0.3, 0.0, 0.05, 1.0], vec![1.0, 2.0, 2.0, 2.0]];
        let fast = m.coalition_values(&row, &bg, Exec::Sequential).unwrap();
        let slow = brute_force_values(&m, &row, &bg, Exec::Sequential);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
        let phi = shapley_exact(&m, &row, &bg, Exec::Parallel).unwrap();
        assert_eq!((phi[1], phi[3]), (0.0, 0.0));
    }

    #[test]
    fn feature_bound() {
        let m = Linear(vec![1.0; 13]);
        assert_eq!(
            shapley_exact(&m, &[0.0; 13], &[vec![0.0; 13]], Exec::Sequential),
            Err(InferError::TooManyFeatures { n: 13, max: 12 })
        );
        let m = Linear(vec![1.0]);
        assert_eq!(shapley_exact(&m, &[0.0], &[], Exec::Sequential), Err(InferError::EmptyBackground));
    }

    #[test]
    fn ranking_is_stable() {
        let r = rank(&["a".into(), "b".into(), "c".into()], &[1.0, 3.0, 1.0]);
        let names: Vec<&str> = r.iter().map(|f| f.feature.as_str()).collect();
        assert_eq!(names, vec!["b", "a", "c"]);
    }
}
