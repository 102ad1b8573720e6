use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub log_prior: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

impl GaussianNb {
    /// Per-class population variances, each widened by `var_smoothing`
    /// times the largest feature variance.
    pub fn fit(x: &Matrix, y: &[f64], var_smoothing: f64) -> Self {
        let d = x.cols();
        let n = x.rows() as f64;
        let max_var = (0..d)
            .map(|j| {
                let c = x.column(j);
                let m = c.iter().sum::<f64>() / n;
                c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
            })
            .fold(0.0f64, f64::max);
        let eps = var_smoothing * max_var.max(f64::MIN_POSITIVE);
        let mut model = GaussianNb { log_prior: [0.0; 2], means: [vec![0.0; d], vec![0.0; d]], variances: [vec![0.0; d], vec![0.0; d]] };
        for class in 0..2 {
            let rows: Vec<usize> = (0..x.rows()).filter(|&i| y[i] as usize == class).collect();
            let k = rows.len() as f64;
            model.log_prior[class] = (k / n).ln();
            for j in 0..d {
                let m = rows.iter().map(|&i| x.get(i, j)).sum::<f64>() / k;
                let v = rows.iter().map(|&i| (x.get(i, j) - m).powi(2)).sum::<f64>() / k;
                model.means[class][j] = m;
                model.variances[class][j] = v + eps;
            }
        }
        model
    }

    fn joint_log_likelihood(&self, x: &[f64], class: usize) -> f64 {
        let mut l = self.log_prior[class];
        for ((xv, m), v) in x.iter().zip(&self.means[class]).zip(&self.variances[class]) {
            l -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (xv - m).powi(2) / v);
        }
        l
    }

    /// `(p(class 0), p(class 1))`.
    pub fn posteriors(&self, x: &[f64]) -> (f64, f64) {
        let (l0, l1) = (self.joint_log_likelihood(x, 0), self.joint_log_likelihood(x, 1));
        let m = l0.max(l1);
        let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
        (e0 / (e0 + e1), e1 / (e0 + e1))
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.posteriors(x).1
    }
}
