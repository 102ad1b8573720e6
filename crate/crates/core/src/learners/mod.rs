//! The seven base classifiers behind one probability interface.

mod linear;
mod matrix;
mod naive_bayes;
mod tree;

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use linear::{logistic_gradient, logistic_objective, platt, svm_objective, svm_subgradient, LinearSvm, LogisticRegression};
pub use matrix::{dot, sigmoid, Matrix};
pub use naive_bayes::GaussianNb;
pub use tree::{fit_tree, normalize_importances, AdaBoost, DecisionTree, GradientBoosting, Node, RandomForest, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    GaussianNb,
    LogisticRegression,
    DecisionTree,
    RandomForest,
    Adaboost,
    GradientBoosting,
    LinearSvm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::GaussianNb,
        Algorithm::LogisticRegression,
        Algorithm::DecisionTree,
        Algorithm::RandomForest,
        Algorithm::Adaboost,
        Algorithm::GradientBoosting,
        Algorithm::LinearSvm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::GaussianNb => "gaussian_nb",
            Algorithm::LogisticRegression => "logistic_regression",
            Algorithm::DecisionTree => "decision_tree",
            Algorithm::RandomForest => "random_forest",
            Algorithm::Adaboost => "adaboost",
            Algorithm::GradientBoosting => "gradient_boosting",
            Algorithm::LinearSvm => "linear_svm",
        }
    }

    pub fn parse(s: &str) -> Result<Algorithm> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown algorithm {s:?}")))
    }

    pub fn has_importances(self) -> bool {
        !matches!(self, Algorithm::GaussianNb | Algorithm::LinearSvm)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case", deny_unknown_fields)]
pub enum Hyper {
    GaussianNb { var_smoothing: f64 },
    LogisticRegression { l2: f64 },
    DecisionTree { max_depth: Option<usize>, min_leaf: usize },
    RandomForest { n_estimators: usize, max_depth: Option<usize>, min_leaf: usize },
    Adaboost { n_estimators: usize, learning_rate: f64, max_depth: usize },
    GradientBoosting { n_estimators: usize, learning_rate: f64, max_depth: usize, min_leaf: usize },
    LinearSvm { l2: f64 },
}

pub const DEPTHS: [Option<usize>; 16] = [
    Some(2),
    Some(3),
    Some(4),
    Some(5),
    Some(6),
    Some(7),
    Some(8),
    Some(9),
    Some(10),
    Some(11),
    Some(12),
    Some(13),
    Some(14),
    Some(15),
    Some(16),
    None,
];
pub const MIN_LEAF: [usize; 4] = [1, 2, 5, 10];
pub const N_ESTIMATORS: [usize; 4] = [50, 100, 200, 400];
pub const LEARNING_RATES: [f64; 4] = [0.01, 0.05, 0.1, 0.3];
pub const L2_RANGE: (f64, f64) = (1e-4, 1e2);
pub const VAR_SMOOTHING_RANGE: (f64, f64) = (1e-12, 1e-6);
/// Weak-learner depths for the boosted ensembles.
pub const ADABOOST_DEPTHS: [usize; 3] = [1, 2, 3];
pub const GB_DEPTHS: [usize; 4] = [2, 3, 4, 5];

fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

fn pick<T: Copy, R: Rng>(rng: &mut R, options: &[T]) -> T {
    options[rng.random_range(0..options.len())]
}

impl Hyper {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Hyper::GaussianNb { .. } => Algorithm::GaussianNb,
            Hyper::LogisticRegression { .. } => Algorithm::LogisticRegression,
            Hyper::DecisionTree { .. } => Algorithm::DecisionTree,
            Hyper::RandomForest { .. } => Algorithm::RandomForest,
            Hyper::Adaboost { .. } => Algorithm::Adaboost,
            Hyper::GradientBoosting { .. } => Algorithm::GradientBoosting,
            Hyper::LinearSvm { .. } => Algorithm::LinearSvm,
        }
    }

    /// Moderate settings used where no search has run.
    pub fn default_for(algorithm: Algorithm) -> Hyper {
        match algorithm {
            Algorithm::GaussianNb => Hyper::GaussianNb { var_smoothing: 1e-9 },
            Algorithm::LogisticRegression => Hyper::LogisticRegression { l2: 1e-2 },
            Algorithm::DecisionTree => Hyper::DecisionTree { max_depth: Some(5), min_leaf: 2 },
            Algorithm::RandomForest => Hyper::RandomForest { n_estimators: 100, max_depth: None, min_leaf: 1 },
            Algorithm::Adaboost => Hyper::Adaboost { n_estimators: 100, learning_rate: 0.1, max_depth: 1 },
            Algorithm::GradientBoosting => Hyper::GradientBoosting { n_estimators: 100, learning_rate: 0.1, max_depth: 3, min_leaf: 1 },
            Algorithm::LinearSvm => Hyper::LinearSvm { l2: 1e-2 },
        }
    }

    /// Draws one point from the algorithm's search space.
    pub fn sample<R: Rng>(algorithm: Algorithm, rng: &mut R) -> Hyper {
        match algorithm {
            Algorithm::GaussianNb => Hyper::GaussianNb { var_smoothing: log_uniform(rng, VAR_SMOOTHING_RANGE) },
            Algorithm::LogisticRegression => Hyper::LogisticRegression { l2: log_uniform(rng, L2_RANGE) },
            Algorithm::DecisionTree => Hyper::DecisionTree { max_depth: pick(rng, &DEPTHS), min_leaf: pick(rng, &MIN_LEAF) },
            Algorithm::RandomForest => Hyper::RandomForest {
                n_estimators: pick(rng, &N_ESTIMATORS),
                max_depth: pick(rng, &DEPTHS),
                min_leaf: pick(rng, &MIN_LEAF),
            },
            Algorithm::Adaboost => Hyper::Adaboost {
                n_estimators: pick(rng, &N_ESTIMATORS),
                learning_rate: pick(rng, &LEARNING_RATES),
                max_depth: pick(rng, &ADABOOST_DEPTHS),
            },
            Algorithm::GradientBoosting => Hyper::GradientBoosting {
                n_estimators: pick(rng, &N_ESTIMATORS),
                learning_rate: pick(rng, &LEARNING_RATES),
                max_depth: pick(rng, &GB_DEPTHS),
                min_leaf: pick(rng, &MIN_LEAF),
            },
            Algorithm::LinearSvm => Hyper::LinearSvm { l2: log_uniform(rng, L2_RANGE) },
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("{}: {m}", self.algorithm())));
        match *self {
            Hyper::GaussianNb { var_smoothing } if !(var_smoothing >= 0.0) => bad("var_smoothing must be ≥ 0"),
            Hyper::LogisticRegression { l2 } | Hyper::LinearSvm { l2 } if !(l2 > 0.0) => bad("l2 must be > 0"),
            Hyper::DecisionTree { min_leaf: 0, .. }
            | Hyper::RandomForest { min_leaf: 0, .. }
            | Hyper::GradientBoosting { min_leaf: 0, .. } => bad("min_leaf must be ≥ 1"),
            Hyper::RandomForest { n_estimators: 0, .. }
            | Hyper::Adaboost { n_estimators: 0, .. }
            | Hyper::GradientBoosting { n_estimators: 0, .. } => bad("n_estimators must be ≥ 1"),
            Hyper::Adaboost { learning_rate, .. } | Hyper::GradientBoosting { learning_rate, .. } if !(learning_rate > 0.0) => {
                bad("learning_rate must be > 0")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub params: Hyper,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(params: Hyper, seed: u64) -> Self {
        ModelSpec { params, seed }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.params.algorithm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fitted {
    GaussianNb(GaussianNb),
    LogisticRegression(LogisticRegression),
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    Adaboost(AdaBoost),
    GradientBoosting(GradientBoosting),
    LinearSvm(LinearSvm),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub n_features: usize,
    pub feature_importances: Option<Vec<f64>>,
    pub fitted: Fitted,
}

pub const MODEL_FORMAT: &str = "commitscan-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Container {
    format: String,
    version: u32,
    model: TrainedModel,
}

/// Trains `spec` on `x` and 0/1 labels `y`.
pub fn fit(spec: &ModelSpec, x: &Matrix, y: &[u8]) -> Result<TrainedModel> {
    spec.params.validate()?;
    if x.rows() != y.len() {
        return Err(Error::Model(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if x.has_non_finite() {
        return Err(Error::Model("feature matrix contains NaN or infinite values".into()));
    }
    if y.iter().any(|v| *v > 1) {
        return Err(Error::Model("labels must be 0 or 1".into()));
    }
    let positives = y.iter().filter(|v| **v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::Model("training labels contain a single class".into()));
    }
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let (fitted, importances) = match spec.params {
        Hyper::GaussianNb { var_smoothing } => (Fitted::GaussianNb(GaussianNb::fit(x, &yf, var_smoothing)), None),
        Hyper::LogisticRegression { l2 } => {
            let m = LogisticRegression::fit(x, &yf, l2);
            let abs: Vec<f64> = m.weights.iter().map(|w| w.abs()).collect();
            (Fitted::LogisticRegression(m), Some(normalize_importances(&abs)))
        }
        Hyper::DecisionTree { max_depth, min_leaf } => {
            let (m, imp) = DecisionTree::fit(x, &yf, max_depth, min_leaf);
            (Fitted::DecisionTree(m), Some(imp))
        }
        Hyper::RandomForest { n_estimators, max_depth, min_leaf } => {
            let (m, imp) = RandomForest::fit(x, &yf, n_estimators, max_depth, min_leaf, spec.seed);
            (Fitted::RandomForest(m), Some(imp))
        }
        Hyper::Adaboost { n_estimators, learning_rate, max_depth } => {
            let (m, imp) = AdaBoost::fit(x, &yf, n_estimators, learning_rate, max_depth);
            (Fitted::Adaboost(m), Some(imp))
        }
        Hyper::GradientBoosting { n_estimators, learning_rate, max_depth, min_leaf } => {
            let (m, imp) = GradientBoosting::fit(x, &yf, n_estimators, learning_rate, max_depth, min_leaf);
            (Fitted::GradientBoosting(m), Some(imp))
        }
        Hyper::LinearSvm { l2 } => (Fitted::LinearSvm(LinearSvm::fit(x, &yf, l2)), None),
    };
    Ok(TrainedModel { spec: *spec, n_features: x.cols(), feature_importances: importances, fitted })
}

impl TrainedModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let p = match &self.fitted {
            Fitted::GaussianNb(m) => m.predict_row(row),
            Fitted::LogisticRegression(m) => m.predict_row(row),
            Fitted::DecisionTree(m) => m.predict_row(row),
            Fitted::RandomForest(m) => m.predict_row(row),
            Fitted::Adaboost(m) => m.predict_row(row),
            Fitted::GradientBoosting(m) => m.predict_row(row),
            Fitted::LinearSvm(m) => m.predict_row(row),
        };
        if p.is_nan() {
            0.5
        } else {
            p.clamp(0.0, 1.0)
        }
    }

    /// Class-1 probabilities.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::Model(format!("model expects {} features, got {}", self.n_features, x.cols())));
        }
        Ok((0..x.rows()).map(|i| self.predict_row(x.row(i))).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let c = Container { format: MODEL_FORMAT.into(), version: MODEL_VERSION, model: self.clone() };
        Ok(serde_json::to_string_pretty(&c)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let c: Container = serde_json::from_str(text)?;
        if c.format != MODEL_FORMAT || c.version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported model container {} v{}", c.format, c.version)));
        }
        Ok(c.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        TrainedModel::from_json(&text)
    }
}

#[cfg(test)]
mod tests;
