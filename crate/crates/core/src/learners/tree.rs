//! Weighted CART regression trees and the ensembles built on them.
//!
//! One split criterion serves every tree: weighted squared error of the
//! target. On 0/1 targets that is half the Gini impurity, so classification
//! trees grow exactly as Gini trees would.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{sigmoid, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_of stops at leaves"),
        }
    }

    pub fn split_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    w: &'a [f64],
    params: TreeParams,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
    gains: Vec<f64>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn weighted_stats(rows: &[usize], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let (mut sw, mut swy, mut swyy) = (0.0, 0.0, 0.0);
    for &i in rows {
        sw += w[i];
        swy += w[i] * y[i];
        swyy += w[i] * y[i] * y[i];
    }
    (sw, swy, swyy)
}

fn sse(sw: f64, swy: f64, swyy: f64) -> f64 {
    if sw <= 0.0 {
        0.0
    } else {
        (swyy - swy * swy / sw).max(0.0)
    }
}

impl Builder<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.cols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < d => {
                let mut f = sample(rng, d, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], parent_sse: f64) -> Option<Split> {
        let features = self.candidate_features();
        let (total_w, total_wy, total_wyy) = weighted_stats(rows, self.y, self.w);
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<Split> = None;
        let mut order = rows.to_vec();
        for f in features {
            order.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)));
            let (mut lw, mut lwy, mut lwyy) = (0.0, 0.0, 0.0);
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                lw += self.w[i];
                lwy += self.w[i] * self.y[i];
                lwyy += self.w[i] * self.y[i] * self.y[i];
                let (a, b) = (self.x.get(i, f), self.x.get(order[pos + 1], f));
                if a == b || pos + 1 < min_leaf || order.len() - pos - 1 < min_leaf {
                    continue;
                }
                let gain = parent_sse - sse(lw, lwy, lwyy) - sse(total_w - lw, total_wy - lwy, total_wyy - lwyy);
                let threshold = a + (b - a) / 2.0;
                // Strictly better only: earlier features and lower thresholds win ties.
                let better = match &best {
                    None => true,
                    Some(s) => gain > s.gain + 1e-12 * parent_sse.max(1e-300),
                };
                if better {
                    best = Some(Split { feature: f, threshold, gain: gain.max(0.0) });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let (sw, swy, swyy) = weighted_stats(rows, self.y, self.w);
        let value = if sw > 0.0 { swy / sw } else { 0.0 };
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value });
        let node_sse = sse(sw, swy, swyy);
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || rows.len() < 2 * self.params.min_leaf.max(1) || node_sse <= 1e-12 * sw.max(1e-300) {
            return id;
        }
        let Some(split) = self.best_split(rows, node_sse) else { return id };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x.get(i, split.feature) <= split.threshold);
        self.gains[split.feature] += split.gain;
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }
}

/// Grows one tree on `rows` (duplicates allowed). Returns the tree and the
/// per-feature total impurity decrease.
pub fn fit_tree(
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    rows: &[usize],
    params: TreeParams,
    rng: Option<&mut ChaCha8Rng>,
) -> (Tree, Vec<f64>) {
    let mut b = Builder { x, y, w, params, rng, nodes: Vec::new(), gains: vec![0.0; x.cols()] };
    b.grow(rows, 0);
    (Tree { nodes: b.nodes }, b.gains)
}

/// Scales to sum 1; uniform when nothing was gained.
pub fn normalize_importances(gains: &[f64]) -> Vec<f64> {
    let total: f64 = gains.iter().sum();
    if total > 0.0 {
        gains.iter().map(|g| g / total).collect()
    } else {
        vec![1.0 / gains.len().max(1) as f64; gains.len()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub tree: Tree,
}

impl DecisionTree {
    pub fn fit(x: &Matrix, y: &[f64], max_depth: Option<usize>, min_leaf: usize) -> (Self, Vec<f64>) {
        let w = vec![1.0; x.rows()];
        let rows: Vec<usize> = (0..x.rows()).collect();
        let (tree, gains) = fit_tree(x, y, &w, &rows, TreeParams { max_depth, min_leaf, max_features: None }, None);
        (DecisionTree { tree }, normalize_importances(&gains))
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.tree.predict_row(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
}

impl RandomForest {
    pub fn fit(x: &Matrix, y: &[f64], n_estimators: usize, max_depth: Option<usize>, min_leaf: usize, seed: u64) -> (Self, Vec<f64>) {
        let n = x.rows();
        let w = vec![1.0; n];
        let max_features = Some(((x.cols() as f64).sqrt() as usize).max(1));
        let params = TreeParams { max_depth, min_leaf, max_features };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trees = Vec::with_capacity(n_estimators);
        let mut importances = vec![0.0; x.cols()];
        for _ in 0..n_estimators {
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let (tree, gains) = fit_tree(x, y, &w, &rows, params, Some(&mut rng));
            for (acc, g) in importances.iter_mut().zip(normalize_importances(&gains)) {
                *acc += g;
            }
            trees.push(tree);
        }
        (RandomForest { trees }, normalize_importances(&importances))
    }

    /// Each tree's class-1 probability (leaf class frequency) for one row.
    pub fn tree_outputs(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict_row(x)).collect()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let outs = self.tree_outputs(x);
        outs.iter().sum::<f64>() / outs.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub trees: Vec<Tree>,
    pub alphas: Vec<f64>,
    /// Training error of the ensemble after each round.
    pub staged_train_error: Vec<f64>,
}

impl AdaBoost {
    /// Binary SAMME over depth-limited trees.
    pub fn fit(x: &Matrix, y: &[f64], n_estimators: usize, learning_rate: f64, max_depth: usize) -> (Self, Vec<f64>) {
        let n = x.rows();
        let rows: Vec<usize> = (0..n).collect();
        let mut w = vec![1.0 / n as f64; n];
        let params = TreeParams { max_depth: Some(max_depth.max(1)), min_leaf: 1, max_features: None };
        let mut model = AdaBoost { trees: Vec::new(), alphas: Vec::new(), staged_train_error: Vec::new() };
        let mut importances = vec![0.0; x.cols()];
        let mut score = vec![0.0; n];
        for _ in 0..n_estimators {
            let (tree, gains) = fit_tree(x, y, &w, &rows, params, None);
            let pred: Vec<f64> = rows.iter().map(|&i| if tree.predict_row(x.row(i)) >= 0.5 { 1.0 } else { 0.0 }).collect();
            let total: f64 = w.iter().sum();
            let err = rows.iter().filter(|&&i| pred[i] != y[i]).map(|&i| w[i]).sum::<f64>() / total;
            if err >= 0.5 {
                if model.trees.is_empty() {
                    // Keep one learner so the model can still predict.
                    model.push_round(tree, 1e-10, &gains, &mut importances, &pred, &mut score, y);
                }
                break;
            }
            let err_c = err.max(1e-10);
            let alpha = learning_rate * ((1.0 - err_c) / err_c).ln();
            model.push_round(tree, alpha, &gains, &mut importances, &pred, &mut score, y);
            if err <= 0.0 {
                break;
            }
            for i in 0..n {
                if pred[i] != y[i] {
                    w[i] *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
        }
        (model, normalize_importances(&importances))
    }

    #[allow(clippy::too_many_arguments)]
    fn push_round(&mut self, tree: Tree, alpha: f64, gains: &[f64], imp: &mut [f64], pred: &[f64], score: &mut [f64], y: &[f64]) {
        for (acc, g) in imp.iter_mut().zip(normalize_importances(gains)) {
            *acc += alpha * g;
        }
        for (s, p) in score.iter_mut().zip(pred) {
            *s += alpha * if *p == 1.0 { 1.0 } else { -1.0 };
        }
        let wrong = score.iter().zip(y).filter(|(s, t)| (**s > 0.0) != (**t == 1.0)).count();
        self.staged_train_error.push(wrong as f64 / y.len() as f64);
        self.trees.push(tree);
        self.alphas.push(alpha);
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let total: f64 = self.alphas.iter().sum();
        if total <= 0.0 {
            return 0.5;
        }
        let f: f64 = self
            .trees
            .iter()
            .zip(&self.alphas)
            .map(|(t, a)| a * if t.predict_row(x) >= 0.5 { 1.0 } else { -1.0 })
            .sum::<f64>()
            / total;
        sigmoid(2.0 * f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GradientBoosting {
    /// Logistic loss; each tree fits the negative gradient and its leaves
    /// take one Newton step (Σ residual / Σ p(1−p)).
    pub fn fit(x: &Matrix, y: &[f64], n_estimators: usize, learning_rate: f64, max_depth: usize, min_leaf: usize) -> (Self, Vec<f64>) {
        let n = x.rows();
        let rows: Vec<usize> = (0..n).collect();
        let w = vec![1.0; n];
        let prior = (y.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
        let init = (prior / (1.0 - prior)).ln();
        let mut f = vec![init; n];
        let params = TreeParams { max_depth: Some(max_depth.max(1)), min_leaf, max_features: None };
        let mut trees = Vec::with_capacity(n_estimators);
        let mut importances = vec![0.0; x.cols()];
        for _ in 0..n_estimators {
            let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
            let resid: Vec<f64> = (0..n).map(|i| y[i] - p[i]).collect();
            let (mut tree, gains) = fit_tree(x, &resid, &w, &rows, params, None);
            for (acc, g) in importances.iter_mut().zip(&gains) {
                *acc += g;
            }
            let mut num = vec![0.0; tree.nodes.len()];
            let mut den = vec![0.0; tree.nodes.len()];
            let leaves: Vec<usize> = (0..n).map(|i| tree.leaf_of(x.row(i))).collect();
            for i in 0..n {
                num[leaves[i]] += resid[i];
                den[leaves[i]] += p[i] * (1.0 - p[i]);
            }
            for (k, node) in tree.nodes.iter_mut().enumerate() {
                if let Node::Leaf { value } = node {
                    *value = if den[k] > 1e-12 { num[k] / den[k] } else { 0.0 };
                }
            }
            for i in 0..n {
                f[i] += learning_rate * tree.predict_row(x.row(i));
            }
            trees.push(tree);
        }
        (GradientBoosting { init, learning_rate, trees }, normalize_importances(&importances))
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.init + self.learning_rate * self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>())
    }
}
