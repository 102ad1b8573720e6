//! Confusion metrics, precision-recall curves, threshold choice and soft voting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn count(y: &[u8], predicted: &[bool]) -> Confusion {
        let mut c = Confusion::default();
        for (t, p) in y.iter().zip(predicted) {
            match (*t == 1, *p) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// Precision is 0 when nothing is predicted positive but positives exist,
    /// and 1 when there were no positives to find.
    pub fn scores(&self) -> Scores {
        let positives = self.tp + self.fn_;
        let predicted = self.tp + self.fp;
        let precision = if predicted > 0 {
            self.tp as f64 / predicted as f64
        } else if positives > 0 {
            0.0
        } else {
            1.0
        };
        let recall = if positives > 0 { self.tp as f64 / positives as f64 } else { 1.0 };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        let total = self.tp + self.fp + self.fn_ + self.tn;
        let accuracy = if total > 0 { (self.tp + self.tn) as f64 / total as f64 } else { 1.0 };
        Scores { precision, recall, f1, accuracy }
    }
}

pub fn evaluate(y: &[u8], predicted: &[bool]) -> Result<Scores> {
    if y.len() != predicted.len() {
        return Err(Error::Invalid(format!("{} labels but {} predictions", y.len(), predicted.len())));
    }
    Ok(Confusion::count(y, predicted).scores())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// One point per distinct score (predict positive when `score ≥ threshold`)
/// plus a closing point above the highest score with recall 0, precision 1.
/// Points are ordered by increasing threshold.
pub fn pr_curve(y: &[u8], scores: &[f64]) -> Result<Vec<PrPoint>> {
    if y.len() != scores.len() {
        return Err(Error::Invalid(format!("{} labels but {} scores", y.len(), scores.len())));
    }
    let positives = y.iter().filter(|v| **v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::Invalid("precision-recall curve needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if y[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint { threshold: t, precision: tp as f64 / (tp + fp) as f64, recall: tp as f64 / positives as f64 });
    }
    let top = scores[order[0]];
    let above = if top < 1.0 { (top + 1.0) / 2.0 } else { 2.0 };
    points.push(PrPoint { threshold: above, precision: 1.0, recall: 0.0 });
    points.sort_by(|a, b| a.threshold.total_cmp(&b.threshold));
    Ok(points)
}

pub const GRID_POINTS: usize = 101;

pub fn recall_grid() -> Vec<f64> {
    (0..GRID_POINTS).map(|i| i as f64 / (GRID_POINTS - 1) as f64).collect()
}

/// Interpolated precision on the recall grid: the best precision reachable at
/// recall ≥ each grid value.
pub fn resample(points: &[PrPoint]) -> Vec<f64> {
    recall_grid()
        .into_iter()
        .map(|r| {
            points
                .iter()
                .filter(|p| p.recall >= r - 1e-12)
                .map(|p| p.precision)
                .fold(0.0, f64::max)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedCurve {
    pub recall_grid: Vec<f64>,
    pub precision_mean: Vec<f64>,
    pub precision_std: Vec<f64>,
}

/// Pointwise mean and population standard deviation of resampled curves.
pub fn average_curves(curves: &[Vec<f64>]) -> AveragedCurve {
    let k = curves.len().max(1) as f64;
    let mut mean = vec![0.0; GRID_POINTS];
    let mut std = vec![0.0; GRID_POINTS];
    for g in 0..GRID_POINTS {
        let m = curves.iter().map(|c| c[g]).sum::<f64>() / k;
        mean[g] = m;
        std[g] = (curves.iter().map(|c| (c[g] - m).powi(2)).sum::<f64>() / k).sqrt();
    }
    AveragedCurve { recall_grid: recall_grid(), precision_mean: mean, precision_std: std }
}

/// Highest-precision point with recall ≥ `min_recall`; ties go to higher
/// recall, then to the lower threshold.
pub fn pick_threshold(points: &[PrPoint], min_recall: f64) -> Result<PrPoint> {
    let mut best: Option<PrPoint> = None;
    for p in points.iter().filter(|p| p.recall >= min_recall) {
        let better = match best {
            None => true,
            Some(b) => {
                p.precision > b.precision
                    || (p.precision == b.precision && (p.recall > b.recall || (p.recall == b.recall && p.threshold < b.threshold)))
            }
        };
        if better {
            best = Some(*p);
        }
    }
    best.ok_or_else(|| {
        let reach = points.iter().map(|p| p.recall).fold(0.0, f64::max);
        Error::Invalid(format!("no threshold reaches recall {min_recall}; best achievable recall is {reach}"))
    })
}

/// Mean of the included models' class-1 probabilities.
pub fn soft_vote(probs: &[Vec<f64>], weights: &[u8]) -> Result<Vec<f64>> {
    if probs.len() != weights.len() {
        return Err(Error::Invalid(format!("{} models but {} weights", probs.len(), weights.len())));
    }
    let included: Vec<&Vec<f64>> = probs.iter().zip(weights).filter(|(_, w)| **w == 1).map(|(p, _)| p).collect();
    if included.is_empty() {
        return Err(Error::Invalid("soft vote needs at least one included model".into()));
    }
    let n = included[0].len();
    if included.iter().any(|p| p.len() != n) {
        return Err(Error::Invalid("probability lists differ in length".into()));
    }
    let k = included.len() as f64;
    Ok((0..n).map(|i| included.iter().map(|p| p[i]).sum::<f64>() / k).collect())
}
