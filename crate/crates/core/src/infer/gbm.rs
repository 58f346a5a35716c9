use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::InferError;
use crate::exec::Exec;
use crate::table::{parse_number, TabularDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    BinaryClassification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub patience: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub min_samples_leaf: usize,
    pub holdout_fraction: f64,
    pub min_rows: usize,
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        Self {
            n_rounds: 200,
            learning_rate: 0.1,
            max_depth: 3,
            patience: 10,
            lambda: 1.0,
            min_samples_leaf: 1,
            holdout_fraction: 0.2,
            min_rows: 20,
            seed: 0,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(format!("learning_rate {} not in (0,1]", self.learning_rate));
        }
        if !(1..=3).contains(&self.max_depth) {
            return Err(format!("max_depth {} not in 1..=3", self.max_depth));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(format!("holdout_fraction {} not in (0,1)", self.holdout_fraction));
        }
        if !(self.lambda >= 0.0) || self.min_samples_leaf == 0 {
            return Err("lambda must be >= 0 and min_samples_leaf >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    fn scale(&mut self, s: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= s;
            }
        }
    }
}

/// A function of a numeric feature vector with an additive margin output.
pub trait MarginModel: Sync {
    fn n_features(&self) -> usize;
    fn margin(&self, x: &[f64]) -> f64;

    /// Mean margin over `background` for every coalition mask of `row`,
    /// when the model has a shortcut. `None` means enumerate directly.
    fn coalition_values(&self, _row: &[f64], _background: &[Vec<f64>], _exec: Exec) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub feature_names: Vec<String>,
    pub target: String,
    pub task: Task,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

const P_CLAMP: f64 = 1e-12;

impl MarginModel for BoostedModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.eval(x)).sum::<f64>()
    }

    // A tree only reads its own split features, so its background mean
    // depends on the mask restricted to those. Tabulate per tree, then sum.
    fn coalition_values(&self, row: &[f64], background: &[Vec<f64>], exec: Exec) -> Option<Vec<f64>> {
        let n = self.feature_names.len();
        let tables: Vec<(Vec<usize>, Vec<f64>)> = exec.map_slice(&self.trees, |t| {
            let mut feats: Vec<usize> = t
                .nodes
                .iter()
                .filter_map(|node| match node {
                    Node::Split { feature, .. } => Some(*feature),
                    Node::Leaf { .. } => None,
                })
                .collect();
            feats.sort_unstable();
            feats.dedup();
            let mut x = vec![0.0; n];
            let table = (0..1usize << feats.len())
                .map(|sub| {
                    let mut total = 0.0;
                    for b in background {
                        x.copy_from_slice(b);
                        for (i, &f) in feats.iter().enumerate() {
                            if sub >> i & 1 == 1 {
                                x[f] = row[f];
                            }
                        }
                        total += t.eval(&x);
                    }
                    total / background.len() as f64
                })
                .collect();
            (feats, table)
        });
        Some(exec.map_range(1usize << n, |mask| {
            let sum: f64 = tables
                .iter()
                .map(|(feats, table)| {
                    let sub = feats
                        .iter()
                        .enumerate()
                        .fold(0usize, |acc, (i, &f)| acc | (mask >> f & 1) << i);
                    table[sub]
                })
                .sum();
            self.base_score + self.learning_rate * sum
        }))
    }
}

impl BoostedModel {
    /// Mean loss of margins `f` against labels `y`: squared error for
    /// regression, log loss for classification.
    pub fn loss(&self, f: &[f64], y: &[f64]) -> f64 {
        mean_loss(self.task, f, y)
    }

    /// Extracts the model's features from `table`, row-major.
    pub fn design(&self, table: &TabularDataset) -> Result<Vec<Vec<f64>>, InferError> {
        design_matrix(table, &self.feature_names)
    }
}

pub(crate) fn mean_loss(task: Task, f: &[f64], y: &[f64]) -> f64 {
    if f.is_empty() {
        return 0.0;
    }
    let total: f64 = match task {
        Task::Regression => f.iter().zip(y).map(|(f, y)| (f - y).powi(2)).sum(),
        Task::BinaryClassification => f
            .iter()
            .zip(y)
            .map(|(&f, &y)| {
                let p = sigmoid(f).clamp(P_CLAMP, 1.0 - P_CLAMP);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum(),
    };
    total / f.len() as f64
}

pub(crate) fn numeric_column(table: &TabularDataset, name: &str) -> Result<Vec<f64>, InferError> {
    let col = table
        .column(name)
        .ok_or_else(|| InferError::MissingFeature(name.to_string()))?;
    col.cells
        .iter()
        .map(|c| parse_number(c).ok_or_else(|| InferError::NonNumeric(name.to_string())))
        .collect()
}

pub fn design_matrix(table: &TabularDataset, features: &[String]) -> Result<Vec<Vec<f64>>, InferError> {
    let cols: Vec<Vec<f64>> = features
        .iter()
        .map(|f| numeric_column(table, f))
        .collect::<Result<_, _>>()?;
    Ok((0..table.n_rows())
        .map(|r| cols.iter().map(|c| c[r]).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedModel {
    pub model: BoostedModel,
    pub train_rows: Vec<usize>,
    pub holdout_rows: Vec<usize>,
    /// Training-split loss after each kept round, starting with the
    /// base score alone.
    pub train_loss: Vec<f64>,
    pub holdout_loss: Vec<f64>,
    pub stopped_early: bool,
}

impl TrainedModel {
    pub fn final_holdout_loss(&self) -> f64 {
        *self.holdout_loss.last().expect("at least the base round")
    }
}

/// Seeded 80/20 style split: returns (train, holdout) row indices, each sorted.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_hold = ((n as f64 * fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut hold = idx[..n_hold].to_vec();
    let mut train = idx[n_hold..].to_vec();
    hold.sort_unstable();
    train.sort_unstable();
    (train, hold)
}

struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn best_split(
    x: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    rows: &[usize],
    n_features: usize,
    cfg: &GbmConfig,
    exec: Exec,
) -> Option<SplitCandidate> {
    let g_tot: f64 = rows.iter().map(|&r| g[r]).sum();
    let h_tot: f64 = rows.iter().map(|&r| h[r]).sum();
    let parent = g_tot * g_tot / (h_tot + cfg.lambda);
    let per_feature = exec.map_range(n_features, |f| {
        let mut order: Vec<usize> = rows.to_vec();
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let (mut gl, mut hl) = (0.0, 0.0);
        let mut best: Option<SplitCandidate> = None;
        for i in 0..order.len() - 1 {
            let r = order[i];
            gl += g[r];
            hl += h[r];
            let (lo, hi) = (x[r][f], x[order[i + 1]][f]);
            if lo == hi || i + 1 < cfg.min_samples_leaf || order.len() - i - 1 < cfg.min_samples_leaf {
                continue;
            }
            let (gr, hr) = (g_tot - gl, h_tot - hl);
            let gain = gl * gl / (hl + cfg.lambda) + gr * gr / (hr + cfg.lambda) - parent;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if !(threshold < hi) {
                    threshold = lo;
                }
                best = Some(SplitCandidate { gain, feature: f, threshold });
            }
        }
        best
    });
    // First feature wins ties so the result does not depend on scheduling.
    per_feature
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<SplitCandidate>, c| match acc {
            Some(a) if a.gain >= c.gain => Some(a),
            _ => Some(c),
        })
        .filter(|c| c.gain > 1e-12)
}

fn grow(
    tree: &mut Tree,
    x: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    rows: Vec<usize>,
    depth: usize,
    n_features: usize,
    cfg: &GbmConfig,
    exec: Exec,
) -> usize {
    let id = tree.nodes.len();
    let leaf = {
        let gs: f64 = rows.iter().map(|&r| g[r]).sum();
        let hs: f64 = rows.iter().map(|&r| h[r]).sum();
        Node::Leaf { value: -gs / (hs + cfg.lambda) }
    };
    tree.nodes.push(leaf);
    if depth >= cfg.max_depth || rows.len() < 2 * cfg.min_samples_leaf {
        return id;
    }
    let Some(split) = best_split(x, g, h, &rows, n_features, cfg, exec) else {
        return id;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][split.feature] <= split.threshold);
    let left = grow(tree, x, g, h, l, depth + 1, n_features, cfg, exec);
    let right = grow(tree, x, g, h, r, depth + 1, n_features, cfg, exec);
    tree.nodes[id] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    id
}

fn grads(task: Task, f: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    match task {
        Task::Regression => (f.iter().zip(y).map(|(f, y)| f - y).collect(), vec![1.0; f.len()]),
        Task::BinaryClassification => f
            .iter()
            .zip(y)
            .map(|(&f, &y)| {
                let p = sigmoid(f);
                (p - y, (p * (1.0 - p)).max(1e-16))
            })
            .unzip(),
    }
}

/// Fits boosted depth-limited trees to `target` using `features`.
///
/// Rounds whose step would raise the training loss are shrunk by halving;
/// a round that cannot lower it ends training. The kept model is the one
/// with the best holdout loss.
pub fn train_gbm(
    table: &TabularDataset,
    target: &str,
    features: &[String],
    task: Task,
    cfg: &GbmConfig,
    exec: Exec,
) -> Result<TrainedModel, InferError> {
    cfg.validate().map_err(InferError::InvalidConfig)?;
    if features.iter().any(|f| f == target) {
        return Err(InferError::TargetLeakage(target.to_string()));
    }
    if features.is_empty() {
        return Err(InferError::NoFeatures);
    }
    let n = table.n_rows();
    if n < cfg.min_rows.max(2) {
        return Err(InferError::TooFewRows { rows: n, min: cfg.min_rows.max(2) });
    }
    let y_all = numeric_column(table, target)?;
    if task == Task::BinaryClassification && y_all.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(InferError::NonBinaryTarget(target.to_string()));
    }
    let x_all = design_matrix(table, features)?;
    let (train, hold) = holdout_split(n, cfg.holdout_fraction, cfg.seed);
    let x: Vec<Vec<f64>> = train.iter().map(|&r| x_all[r].clone()).collect();
    let y: Vec<f64> = train.iter().map(|&r| y_all[r]).collect();
    let xh: Vec<Vec<f64>> = hold.iter().map(|&r| x_all[r].clone()).collect();
    let yh: Vec<f64> = hold.iter().map(|&r| y_all[r]).collect();

    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let base_score = match task {
        Task::Regression => mean,
        Task::BinaryClassification => {
            let p = mean.clamp(P_CLAMP, 1.0 - P_CLAMP);
            (p / (1.0 - p)).ln()
        }
    };
    let mut model = BoostedModel {
        trees: Vec::new(),
        learning_rate: cfg.learning_rate,
        base_score,
        feature_names: features.to_vec(),
        target: target.to_string(),
        task,
    };
    let mut f = vec![base_score; x.len()];
    let mut fh = vec![base_score; xh.len()];
    let mut train_loss = vec![mean_loss(task, &f, &y)];
    let mut holdout_loss = vec![mean_loss(task, &fh, &yh)];
    let (mut best_round, mut best_loss) = (0usize, holdout_loss[0]);
    let mut stopped_early = false;
    let rows: Vec<usize> = (0..x.len()).collect();

    for round in 1..=cfg.n_rounds {
        let (g, h) = grads(task, &f, &y);
        if g.iter().all(|v| v.abs() < 1e-12) {
            break;
        }
        let mut tree = Tree { nodes: Vec::new() };
        grow(&mut tree, &x, &g, &h, rows.clone(), 0, features.len(), cfg, exec);
        let prev = *train_loss.last().unwrap();
        let step = |t: &Tree, xs: &[Vec<f64>], base: &[f64]| -> Vec<f64> {
            xs.iter().zip(base).map(|(xi, b)| b + cfg.learning_rate * t.eval(xi)).collect()
        };
        let mut accepted = None;
        for _ in 0..40 {
            let cand = step(&tree, &x, &f);
            let loss = mean_loss(task, &cand, &y);
            if loss < prev {
                accepted = Some((cand, loss));
                break;
            }
            tree.scale(0.5);
        }
        let Some((cand, loss)) = accepted else {
            break;
        };
        f = cand;
        fh = step(&tree, &xh, &fh);
        model.trees.push(tree);
        train_loss.push(loss);
        let hl = mean_loss(task, &fh, &yh);
        holdout_loss.push(hl);
        if hl < best_loss - 1e-15 {
            best_loss = hl;
            best_round = round;
        } else if round - best_round >= cfg.patience {
            stopped_early = true;
            break;
        }
    }
    model.trees.truncate(best_round);
    train_loss.truncate(best_round + 1);
    holdout_loss.truncate(best_round + 1);
    Ok(TrainedModel {
        model,
        train_rows: train,
        holdout_rows: hold,
        train_loss,
        holdout_loss,
        stopped_early,
    })
}
