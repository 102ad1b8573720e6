//! Soft voting over subsets of base models and stacking with a final estimator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curves::soft_vote;
use super::folds::split;
use super::search::{score_oof, select_best, Candidate, CvResult, FittedPipeline};
use crate::error::{Error, Result};
use crate::learners::{fit, Algorithm, Hyper, Matrix, ModelSpec};

/// Every non-empty inclusion mask over `n` bases, in binary counting order.
pub fn voting_grid(n: usize) -> Vec<Vec<u8>> {
    (1u32..(1 << n)).map(|bits| (0..n).map(|i| ((bits >> i) & 1) as u8).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingEntry {
    pub weights: Vec<u8>,
    pub cv: CvResult,
}

/// Scores every voting mask on the bases' out-of-fold probabilities.
pub fn voting_search(oof: &[Vec<f64>], y: &[u8], folds: &[u8], k: usize, min_recall: f64) -> Result<(Vec<VotingEntry>, usize)> {
    let grid = voting_grid(oof.len());
    if grid.is_empty() {
        return Err(Error::Invalid("voting grid is empty".into()));
    }
    let entries = grid
        .into_iter()
        .map(|weights| {
            let probs = soft_vote(oof, &weights)?;
            Ok(VotingEntry { cv: score_oof(y, &probs, folds, k, min_recall)?, weights })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = select_best(entries.iter().map(|e| &e.cv).enumerate()).expect("non-empty grid");
    Ok((entries, best))
}

/// Final estimators tried on top of the base probabilities.
pub fn stacking_grid(seed: u64) -> Vec<ModelSpec> {
    let h = [
        Hyper::GaussianNb { var_smoothing: 1e-9 },
        Hyper::LogisticRegression { l2: 1e-2 },
        Hyper::LogisticRegression { l2: 1.0 },
        Hyper::DecisionTree { max_depth: Some(2), min_leaf: 5 },
        Hyper::DecisionTree { max_depth: Some(3), min_leaf: 5 },
        Hyper::RandomForest { n_estimators: 100, max_depth: Some(3), min_leaf: 5 },
        Hyper::RandomForest { n_estimators: 100, max_depth: None, min_leaf: 5 },
        Hyper::Adaboost { n_estimators: 50, learning_rate: 0.1, max_depth: 1 },
        Hyper::Adaboost { n_estimators: 50, learning_rate: 0.3, max_depth: 1 },
        Hyper::GradientBoosting { n_estimators: 50, learning_rate: 0.1, max_depth: 2, min_leaf: 5 },
        Hyper::GradientBoosting { n_estimators: 100, learning_rate: 0.05, max_depth: 2, min_leaf: 5 },
        Hyper::LinearSvm { l2: 1e-2 },
        Hyper::LinearSvm { l2: 1.0 },
    ];
    h.into_iter().map(|p| ModelSpec::new(p, seed)).collect()
}

pub fn distinct_final_estimators(grid: &[ModelSpec]) -> usize {
    Algorithm::ALL.iter().filter(|a| grid.iter().any(|s| s.algorithm() == **a)).count()
}

/// Base-model inputs for stacking.
pub struct StackBase<'a> {
    pub x: &'a Matrix,
    pub candidate: &'a Candidate,
    /// Out-of-fold probabilities from the outer cross-validation.
    pub oof: &'a [f64],
}

/// Per outer fold: the training rows, their inner out-of-fold base
/// probabilities, and the base probabilities on the held-out rows.
pub struct MetaFold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub train_meta: Matrix,
    pub test_meta: Matrix,
}

/// Inner cross-validation over the remaining folds so the final estimator
/// only ever sees probabilities for rows the bases did not train on.
pub fn meta_folds(bases: &[StackBase<'_>], y: &[u8], folds: &[u8], k: usize) -> Result<Vec<MetaFold>> {
    let n = y.len();
    if bases.iter().any(|b| b.x.rows() != n || b.oof.len() != n) {
        return Err(Error::Invalid("stacking bases disagree on row count".into()));
    }
    let jobs: Vec<(u8, u8, usize)> = (0..k as u8)
        .flat_map(|f| (0..k as u8).filter(move |g| *g != f).flat_map(move |g| (0..bases.len()).map(move |b| (f, g, b))))
        .collect();
    let preds: Vec<Result<Vec<(usize, f64)>>> = jobs
        .par_iter()
        .map(|&(f, g, b)| {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f && folds[i] != g).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == g).collect();
            let ytr: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let base = &bases[b];
            let p = FittedPipeline::fit(base.candidate, &base.x.select_rows(&train), &ytr)?;
            Ok(test.iter().copied().zip(p.predict(&base.x.select_rows(&test))?).collect())
        })
        .collect();
    let mut inner = vec![vec![vec![f64::NAN; bases.len()]; n]; k];
    for (&(f, _, b), r) in jobs.iter().zip(preds) {
        for (i, p) in r? {
            inner[f as usize][i][b] = p;
        }
    }
    (0..k as u8)
        .map(|f| {
            let (train, test) = split(folds, f);
            let train_rows: Vec<Vec<f64>> = train.iter().map(|&i| inner[f as usize][i].clone()).collect();
            let test_rows: Vec<Vec<f64>> = test.iter().map(|&i| bases.iter().map(|b| b.oof[i]).collect()).collect();
            Ok(MetaFold { train_meta: Matrix::from_rows(&train_rows)?, test_meta: Matrix::from_rows(&test_rows)?, train, test })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingEntry {
    pub final_estimator: ModelSpec,
    pub cv: CvResult,
}

/// Out-of-fold probabilities of one final estimator over the meta folds.
pub fn stacked_oof(spec: &ModelSpec, meta: &[MetaFold], y: &[u8]) -> Result<Vec<f64>> {
    let mut oof = vec![f64::NAN; y.len()];
    for m in meta {
        let ytr: Vec<u8> = m.train.iter().map(|&i| y[i]).collect();
        let model = fit(spec, &m.train_meta, &ytr)?;
        for (i, p) in m.test.iter().zip(model.predict_proba(&m.test_meta)?) {
            oof[*i] = p;
        }
    }
    Ok(oof)
}

pub fn stacking_search(grid: &[ModelSpec], meta: &[MetaFold], y: &[u8], folds: &[u8], k: usize, min_recall: f64) -> Result<(Vec<StackingEntry>, usize)> {
    if grid.is_empty() {
        return Err(Error::Invalid("stacking grid is empty".into()));
    }
    let entries = grid
        .par_iter()
        .map(|spec| {
            let oof = stacked_oof(spec, meta, y)?;
            Ok(StackingEntry { final_estimator: *spec, cv: score_oof(y, &oof, folds, k, min_recall)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = select_best(entries.iter().map(|e| &e.cv).enumerate()).expect("non-empty grid");
    Ok((entries, best))
}
