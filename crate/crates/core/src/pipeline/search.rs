//! Selection-plus-model candidates, their cross-validation, and random search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curves::{evaluate, pick_threshold, pr_curve, PrPoint, Scores};
use super::folds::split;
use super::select::{correlation_filter, prune_constant_duplicates, rfe, variance_select, Scaler};
use crate::error::{Error, Result};
use crate::learners::{fit, Algorithm, Hyper, Matrix, ModelSpec, TrainedModel};

pub const RFE_KEEP: [usize; 4] = [10, 25, 50, 100];
pub const RFE_STEPS: [usize; 3] = [5, 10, 20];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n_iter: usize,
    pub seed: u64,
    pub min_recall: f64,
    pub variance_threshold: f64,
    pub r_max: f64,
    /// Drop constant and duplicate columns per training split.
    #[serde(default)]
    pub prune_per_fold: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { n_iter: 200, seed: 0, min_recall: 0.3, variance_threshold: 0.01, r_max: 0.95, prune_per_fold: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RfeParams {
    pub n_keep: usize,
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Selection {
    #[serde(default)]
    pub prune: bool,
    pub variance: Option<f64>,
    pub correlation: Option<f64>,
    pub rfe: Option<RfeParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub model: ModelSpec,
    pub selection: Selection,
}

impl Candidate {
    /// Draws model hyperparameters and the three selection toggles together.
    pub fn sample<R: Rng>(algorithm: Algorithm, cfg: &SearchConfig, rng: &mut R, seed: u64) -> Candidate {
        let params = Hyper::sample(algorithm, rng);
        let variance = rng.random_bool(0.5).then_some(cfg.variance_threshold);
        let correlation = rng.random_bool(0.5).then_some(cfg.r_max);
        let rfe = (algorithm.has_importances() && rng.random_bool(0.5)).then(|| RfeParams {
            n_keep: RFE_KEEP[rng.random_range(0..RFE_KEEP.len())],
            step: RFE_STEPS[rng.random_range(0..RFE_STEPS.len())],
        });
        Candidate { model: ModelSpec::new(params, seed), selection: Selection { prune: cfg.prune_per_fold, variance, correlation, rfe } }
    }
}

/// Columns and scaler learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    pub columns: Vec<usize>,
    pub scaler: Scaler,
}

impl Preprocess {
    pub fn apply(&self, x: &Matrix) -> Matrix {
        self.scaler.transform(&x.select_columns(&self.columns))
    }
}

/// Variance filter, correlation filter (columns taken in matrix order, which
/// is name order for embeddings), standard scaling, then RFE on the scaled
/// columns.
pub fn preprocess(cand: &Candidate, x: &Matrix, y: &[u8]) -> Result<Preprocess> {
    let mut cols: Vec<usize> = if cand.selection.prune { prune_constant_duplicates(x) } else { (0..x.cols()).collect() };
    if cols.is_empty() {
        return Err(Error::Invalid("every column is constant on the training rows".into()));
    }
    if let Some(t) = cand.selection.variance {
        let mask = variance_select(&x.select_columns(&cols), t)?;
        cols = cols.iter().zip(&mask).filter(|(_, k)| **k).map(|(c, _)| *c).collect();
    }
    if let Some(r) = cand.selection.correlation {
        let sub = x.select_columns(&cols);
        let order: Vec<usize> = (0..cols.len()).collect();
        let mask = correlation_filter(&sub, &order, r);
        cols = cols.iter().zip(&mask).filter(|(_, k)| **k).map(|(c, _)| *c).collect();
    }
    let mut scaler = Scaler::fit(&x.select_columns(&cols));
    if let Some(p) = cand.selection.rfe {
        if p.n_keep < cols.len() {
            let scaled = scaler.transform(&x.select_columns(&cols));
            let keep = rfe(&cand.model, &scaled, y, p.n_keep, p.step)?;
            cols = keep.iter().map(|&k| cols[k]).collect();
            scaler = Scaler { mean: keep.iter().map(|&k| scaler.mean[k]).collect(), std: keep.iter().map(|&k| scaler.std[k]).collect() };
        }
    }
    Ok(Preprocess { columns: cols, scaler })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub candidate: Candidate,
    pub preprocess: Preprocess,
    pub model: TrainedModel,
}

impl FittedPipeline {
    pub fn fit(cand: &Candidate, x: &Matrix, y: &[u8]) -> Result<FittedPipeline> {
        let preprocess = preprocess(cand, x, y)?;
        let model = fit(&cand.model, &preprocess.apply(x), y)?;
        Ok(FittedPipeline { candidate: *cand, preprocess, model })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if let Some(&max) = self.preprocess.columns.iter().max() {
            if max >= x.cols() {
                return Err(Error::Model(format!("pipeline needs column {max}, matrix has {}", x.cols())));
            }
        }
        self.model.predict_proba(&self.preprocess.apply(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: u8,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub chosen_threshold: f64,
    pub pr_points: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    pub mean: Scores,
    pub std: Scores,
    #[serde(skip)]
    pub oof: Vec<f64>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let m = values.clone().sum::<f64>() / n;
    (m, (values.map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Scores out-of-fold probabilities fold by fold. Each fold's threshold is
/// picked on the other folds' scores, so the test fold never sets its own
/// operating point.
pub fn score_oof(y: &[u8], oof: &[f64], folds: &[u8], k: usize, min_recall: f64) -> Result<CvResult> {
    let mut results = Vec::with_capacity(k);
    for f in 0..k as u8 {
        let (other, test) = split(folds, f);
        let pick = |idx: &[usize]| -> (Vec<u8>, Vec<f64>) { (idx.iter().map(|&i| y[i]).collect(), idx.iter().map(|&i| oof[i]).collect()) };
        let (yo, so) = pick(&other);
        let threshold = pick_threshold(&pr_curve(&yo, &so)?, min_recall)?.threshold;
        let (yt, st) = pick(&test);
        let predicted: Vec<bool> = st.iter().map(|s| *s >= threshold).collect();
        let s = evaluate(&yt, &predicted)?;
        results.push(FoldResult {
            fold: f,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            accuracy: s.accuracy,
            chosen_threshold: threshold,
            pr_points: pr_curve(&yt, &st)?,
        });
    }
    let stat = |g: fn(&FoldResult) -> f64| mean_std(results.iter().map(g));
    let (p, r, f1, a) = (stat(|f| f.precision), stat(|f| f.recall), stat(|f| f.f1), stat(|f| f.accuracy));
    Ok(CvResult {
        mean: Scores { precision: p.0, recall: r.0, f1: f1.0, accuracy: a.0 },
        std: Scores { precision: p.1, recall: r.1, f1: f1.1, accuracy: a.1 },
        folds: results,
        oof: oof.to_vec(),
    })
}

/// Out-of-fold probabilities of `cand`, fitting on each training split.
pub fn oof_scores(cand: &Candidate, x: &Matrix, y: &[u8], folds: &[u8], k: usize) -> Result<Vec<f64>> {
    let mut oof = vec![f64::NAN; y.len()];
    for f in 0..k as u8 {
        let (train, test) = split(folds, f);
        let ytr: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let p = FittedPipeline::fit(cand, &x.select_rows(&train), &ytr)?;
        for (i, s) in test.iter().zip(p.predict(&x.select_rows(&test))?) {
            oof[*i] = s;
        }
    }
    Ok(oof)
}

pub fn cross_validate(cand: &Candidate, x: &Matrix, y: &[u8], folds: &[u8], k: usize, min_recall: f64) -> Result<CvResult> {
    let oof = oof_scores(cand, x, y, folds, k)?;
    score_oof(y, &oof, folds, k, min_recall)
}

/// Index of the best result: highest mean precision, then mean recall, then
/// the earliest entry.
pub fn select_best<'a>(results: impl IntoIterator<Item = (usize, &'a CvResult)>) -> Option<usize> {
    let mut best: Option<(usize, &CvResult)> = None;
    for (i, r) in results {
        let better = match best {
            None => true,
            Some((_, b)) => r.mean.precision > b.mean.precision || (r.mean.precision == b.mean.precision && r.mean.recall > b.mean.recall),
        };
        if better {
            best = Some((i, r));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Candidate,
    pub cv: CvResult,
    pub draw: usize,
    pub evaluated: usize,
    pub failed: usize,
}

/// Evaluates `n_iter` sampled candidates of one algorithm in parallel.
/// `stream` separates the random streams of independent searches.
pub fn random_search(algorithm: Algorithm, x: &Matrix, y: &[u8], folds: &[u8], k: usize, cfg: &SearchConfig, stream: u64) -> Result<SearchOutcome> {
    if cfg.n_iter == 0 {
        return Err(Error::Invalid("n_iter must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let draws: Vec<Candidate> = (0..cfg.n_iter)
        .map(|_| {
            let seed = rng.random::<u64>();
            Candidate::sample(algorithm, cfg, &mut rng, seed)
        })
        .collect();
    let results: Vec<Result<CvResult>> = draws.par_iter().map(|c| cross_validate(c, x, y, folds, k, cfg.min_recall)).collect();
    let mut failed = 0;
    for (c, r) in draws.iter().zip(&results) {
        if let Err(e) = r {
            failed += 1;
            log::debug!("{algorithm} candidate {c:?} failed: {e}");
        }
    }
    let ok = results.iter().enumerate().filter_map(|(i, r)| r.as_ref().ok().map(|r| (i, r)));
    let draw = select_best(ok).ok_or_else(|| Error::Model(format!("every {algorithm} candidate failed")))?;
    let cv = results.into_iter().nth(draw).expect("index in range")?;
    Ok(SearchOutcome { best: draws[draw], cv, draw, evaluated: cfg.n_iter, failed })
}
