//! L2-regularized logistic regression and a calibrated linear SVM.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::matrix::{dot, sigmoid, Matrix};

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss plus `l2/2·‖w‖²`; the bias is unpenalized.
pub fn logistic_objective(x: &Matrix, y: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = x.rows() as f64;
    let loss: f64 = (0..x.rows())
        .map(|i| {
            let z = dot(x.row(i), w) + b;
            softplus(z) - y[i] * z
        })
        .sum();
    loss / n + 0.5 * l2 * dot(w, w)
}

/// Gradient of [`logistic_objective`]: `(∂w, ∂b)`.
pub fn logistic_gradient(x: &Matrix, y: &[f64], w: &[f64], b: f64, l2: f64) -> (Vec<f64>, f64) {
    let n = x.rows() as f64;
    let mut gw: Vec<f64> = w.iter().map(|v| l2 * v).collect();
    let mut gb = 0.0;
    for i in 0..x.rows() {
        let r = (sigmoid(dot(x.row(i), w) + b) - y[i]) / n;
        for (g, xv) in gw.iter_mut().zip(x.row(i)) {
            *g += r * xv;
        }
        gb += r;
    }
    (gw, gb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticRegression {
    /// Damped Newton with backtracking line search.
    pub fn fit(x: &Matrix, y: &[f64], l2: f64) -> Self {
        let (n, d) = (x.rows(), x.cols());
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut obj = logistic_objective(x, y, &w, b, l2);
        for _ in 0..100 {
            let (gw, gb) = logistic_gradient(x, y, &w, b, l2);
            let gmax = gw.iter().chain(std::iter::once(&gb)).fold(0.0f64, |m, g| m.max(g.abs()));
            if gmax < 1e-10 {
                break;
            }
            let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
            for i in 0..n {
                let p = sigmoid(dot(x.row(i), &w) + b);
                let s = p * (1.0 - p) / n as f64;
                let row = x.row(i);
                for a in 0..=d {
                    let xa = if a < d { row[a] } else { 1.0 };
                    if xa == 0.0 {
                        continue;
                    }
                    for c in a..=d {
                        let xc = if c < d { row[c] } else { 1.0 };
                        h[(a, c)] += s * xa * xc;
                    }
                }
            }
            for a in 0..=d {
                for c in 0..a {
                    h[(a, c)] = h[(c, a)];
                }
                h[(a, a)] += if a < d { l2 } else { 0.0 } + 1e-10;
            }
            let mut g = DVector::from_vec(gw.clone());
            g = g.push(gb);
            let step = match h.cholesky() {
                Some(ch) => ch.solve(&g),
                None => g.clone(),
            };
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let nw: Vec<f64> = w.iter().zip(step.iter()).map(|(wi, si)| wi - t * si).collect();
                let nb = b - t * step[d];
                let nobj = logistic_objective(x, y, &nw, nb, l2);
                if nobj <= obj {
                    improved = nobj < obj;
                    w = nw;
                    b = nb;
                    obj = nobj;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        LogisticRegression { weights: w, bias: b }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(dot(x, &self.weights) + self.bias)
    }
}

/// Mean hinge loss on ±1 targets plus `l2/2·‖w‖²`.
pub fn svm_objective(x: &Matrix, y: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = x.rows() as f64;
    let loss: f64 = (0..x.rows())
        .map(|i| {
            let t = 2.0 * y[i] - 1.0;
            (1.0 - t * (dot(x.row(i), w) + b)).max(0.0)
        })
        .sum();
    loss / n + 0.5 * l2 * dot(w, w)
}

/// A subgradient of [`svm_objective`]; equals the gradient away from hinge kinks.
pub fn svm_subgradient(x: &Matrix, y: &[f64], w: &[f64], b: f64, l2: f64) -> (Vec<f64>, f64) {
    let n = x.rows() as f64;
    let mut gw: Vec<f64> = w.iter().map(|v| l2 * v).collect();
    let mut gb = 0.0;
    for i in 0..x.rows() {
        let t = 2.0 * y[i] - 1.0;
        if t * (dot(x.row(i), w) + b) < 1.0 {
            for (g, xv) in gw.iter_mut().zip(x.row(i)) {
                *g -= t * xv / n;
            }
            gb -= t / n;
        }
    }
    (gw, gb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Platt scaling `p = σ(a·score + c)`.
    pub platt_a: f64,
    pub platt_c: f64,
}

const SVM_ITERATIONS: usize = 300;

impl LinearSvm {
    pub fn fit(x: &Matrix, y: &[f64], l2: f64) -> Self {
        let d = x.cols();
        let (mut w, mut b) = (vec![0.0; d], 0.0);
        let (mut best_w, mut best_b) = (w.clone(), b);
        let mut best = svm_objective(x, y, &w, b, l2);
        for k in 0..SVM_ITERATIONS {
            let (gw, gb) = svm_subgradient(x, y, &w, b, l2);
            let eta = (1.0 / (l2 * (k as f64 + 1.0))).min(1.0 / (k as f64 + 1.0).sqrt());
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= eta * g;
            }
            b -= eta * gb;
            let obj = svm_objective(x, y, &w, b, l2);
            if obj < best {
                best = obj;
                best_w.clone_from(&w);
                best_b = b;
            }
        }
        let scores: Vec<f64> = (0..x.rows()).map(|i| dot(x.row(i), &best_w) + best_b).collect();
        let (platt_a, platt_c) = platt(&scores, y);
        LinearSvm { weights: best_w, bias: best_b, platt_a, platt_c }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(x, &self.weights) + self.bias
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.platt_a * self.decision(x) + self.platt_c)
    }
}

/// Fits a 1-D logistic map from scores to labels using Platt's smoothed
/// targets, by Newton's method on (a, c).
pub fn platt(scores: &[f64], y: &[f64]) -> (f64, f64) {
    let n_pos = y.iter().filter(|v| **v == 1.0).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let t: Vec<f64> = y.iter().map(|v| if *v == 1.0 { hi } else { lo }).collect();
    let (mut a, mut c) = (1.0, 0.0);
    let obj = |a: f64, c: f64| -> f64 { scores.iter().zip(&t).map(|(s, ti)| softplus(a * s + c) - ti * (a * s + c)).sum() };
    let mut cur = obj(a, c);
    for _ in 0..100 {
        let (mut g1, mut g2, mut h11, mut h12, mut h22) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for (s, ti) in scores.iter().zip(&t) {
            let p = sigmoid(a * s + c);
            let r = p - ti;
            let v = p * (1.0 - p);
            g1 += r * s;
            g2 += r;
            h11 += v * s * s;
            h12 += v * s;
            h22 += v;
        }
        if g1.abs().max(g2.abs()) < 1e-10 {
            break;
        }
        let det = h11 * h22 - h12 * h12;
        let (da, dc) = if det.abs() > 1e-300 { ((h22 * g1 - h12 * g2) / det, (h11 * g2 - h12 * g1) / det) } else { (g1, g2) };
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let (na, nc) = (a - step * da, c - step * dc);
            let v = obj(na, nc);
            if v < cur {
                a = na;
                c = nc;
                cur = v;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (a, c)
}
