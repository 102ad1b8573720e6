//! Column selection and scaling, always fitted on training rows only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit, Matrix, ModelSpec};

fn rounded_key(v: f64) -> u64 {
    if v == 0.0 {
        0
    } else {
        format!("{v:.11e}").parse::<f64>().unwrap_or(v).to_bits()
    }
}

/// Columns that are neither constant nor a repeat of an earlier column on
/// these rows, compared at 12 significant digits.
pub fn prune_constant_duplicates(x: &Matrix) -> Vec<usize> {
    let mut seen = std::collections::HashSet::new();
    let mut keep = Vec::new();
    for j in 0..x.cols() {
        let key: Vec<u64> = (0..x.rows()).map(|i| rounded_key(x.get(i, j))).collect();
        if key.windows(2).all(|w| w[0] == w[1]) {
            continue;
        }
        if seen.insert(key) {
            keep.push(j);
        }
    }
    keep
}

/// Keeps columns whose variance after min-max scaling is at least `threshold`.
pub fn variance_select(x: &Matrix, threshold: f64) -> Result<Vec<bool>> {
    let n = x.rows() as f64;
    let mask: Vec<bool> = (0..x.cols())
        .map(|j| {
            let c = x.column(j);
            let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            let range = hi - lo;
            let var = if range > 0.0 {
                let s: Vec<f64> = c.iter().map(|v| (v - lo) / range).collect();
                let m = s.iter().sum::<f64>() / n;
                s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
            } else {
                0.0
            };
            var >= threshold
        })
        .collect();
    if !mask.iter().any(|k| *k) && x.cols() > 0 {
        return Err(Error::Invalid(format!("variance threshold {threshold} removes every column")));
    }
    Ok(mask)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Scans columns in the given order (callers pass name order) and drops any
/// column whose |r| with an already kept column exceeds `r_max`.
pub fn correlation_filter(x: &Matrix, order: &[usize], r_max: f64) -> Vec<bool> {
    let mut mask = vec![false; x.cols()];
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for &j in order {
        let c = x.column(j);
        if kept.iter().all(|k| pearson(k, &c).abs() <= r_max) {
            mask[j] = true;
            kept.push(c);
        }
    }
    mask
}

/// Recursive feature elimination by the model's importances. Returns the
/// surviving column indices in ascending order.
pub fn rfe(spec: &ModelSpec, x: &Matrix, y: &[u8], n_keep: usize, step: usize) -> Result<Vec<usize>> {
    if !spec.algorithm().has_importances() {
        return Err(Error::Invalid(format!("{} exposes no feature importances for elimination", spec.algorithm())));
    }
    let mut alive: Vec<usize> = (0..x.cols()).collect();
    let step = step.max(1);
    while alive.len() > n_keep.max(1) {
        let sub = x.select_columns(&alive);
        let model = fit(spec, &sub, y)?;
        let imp = model.feature_importances.expect("algorithm has importances");
        let drop = step.min(alive.len() - n_keep.max(1));
        let mut order: Vec<usize> = (0..alive.len()).collect();
        // Lowest importance first; later columns go first among equals.
        order.sort_by(|&a, &b| imp[a].total_cmp(&imp[b]).then(b.cmp(&a)));
        let mut gone = vec![false; alive.len()];
        for &k in &order[..drop] {
            gone[k] = true;
        }
        alive = alive.iter().zip(&gone).filter(|(_, g)| !**g).map(|(c, _)| *c).collect();
    }
    Ok(alive)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Population statistics per column.
    pub fn fit(x: &Matrix) -> Scaler {
        let n = x.rows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.cols());
        let mut std = Vec::with_capacity(x.cols());
        for j in 0..x.cols() {
            let c = x.column(j);
            let m = c.iter().sum::<f64>() / n;
            mean.push(m);
            std.push((c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt());
        }
        Scaler { mean, std }
    }

    /// Constant training columns map to 0.
    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                let s = self.std[j];
                out.set(i, j, if s > 1e-12 * self.mean[j].abs().max(1.0) { (x.get(i, j) - self.mean[j]) / s } else { 0.0 });
            }
        }
        out
    }
}

pub fn standard_scale(train: &Matrix, test: &Matrix) -> (Matrix, Matrix, Scaler) {
    let s = Scaler::fit(train);
    (s.transform(train), s.transform(test), s)
}
