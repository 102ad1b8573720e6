//! The full training run over the per-analyzer embeddings, and its files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::curves::{average_curves, pick_threshold, pr_curve, resample, soft_vote, AveragedCurve, Scores};
use super::ensemble::{distinct_final_estimators, meta_folds, stacking_grid, stacking_search, voting_search, StackBase};
use super::folds::{stratified_kfold, validate_folds};
use super::search::{random_search, select_best, Candidate, CvResult, FittedPipeline, SearchConfig, SearchOutcome};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::learners::{fit, Algorithm, Matrix, ModelSpec, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FoldSource {
    /// The manifest's `test_fold` column.
    External,
    Stratified { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub search: SearchConfig,
    pub algorithms: Vec<Algorithm>,
    pub folds: FoldSource,
    /// Also score the whole selection procedure by nested cross-validation.
    #[serde(default)]
    pub nested: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { search: SearchConfig::default(), algorithms: Algorithm::ALL.to_vec(), folds: FoldSource::External, nested: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Scores,
    pub std: Scores,
}

impl From<&CvResult> for Summary {
    fn from(cv: &CvResult) -> Self {
        Summary { mean: cv.mean, std: cv.std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRow {
    pub candidate: Candidate,
    pub draw: usize,
    pub evaluated: usize,
    pub failed: usize,
    pub cv: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub n_features: usize,
    pub searches: BTreeMap<String, SearchRow>,
    pub best_algorithm: Algorithm,
    pub best: Candidate,
    pub cv: CvResult,
    pub deploy_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingRow {
    pub members: Vec<String>,
    pub weights: Vec<u8>,
    pub cv: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingReport {
    pub bases: Vec<String>,
    pub grid_size: usize,
    pub grid: Vec<VotingRow>,
    pub best: usize,
    pub cv: CvResult,
    pub deploy_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingRow {
    pub final_estimator: ModelSpec,
    pub cv: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingReport {
    pub bases: Vec<String>,
    pub final_estimators: usize,
    pub grid_size: usize,
    pub grid: Vec<StackingRow>,
    pub best: usize,
    pub cv: CvResult,
    pub deploy_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub n_rows: usize,
    pub n_positives: usize,
    pub n_folds: usize,
    pub embeddings: BTreeMap<String, EmbeddingReport>,
    pub voting: VotingReport,
    pub stacking: StackingReport,
    pub comparison: BTreeMap<String, Summary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nested: Option<NestedReport>,
}

/// One outer fold of the nested evaluation: everything was selected on the
/// other folds and scored here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedFold {
    pub fold: u8,
    pub voting_members: Vec<String>,
    pub voting_threshold: f64,
    pub stacking_final: Algorithm,
    pub stacking_threshold: f64,
    pub voting: Scores,
    pub stacking: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedReport {
    pub folds: Vec<NestedFold>,
    pub voting: Summary,
    pub stacking: Summary,
}

pub const REPORT_FORMAT: &str = "commitscan-run";
pub const ENSEMBLE_FORMAT: &str = "commitscan-ensemble";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub format: String,
    pub version: u32,
    pub bases: Vec<String>,
    pub voting_weights: Vec<u8>,
    pub voting_threshold: f64,
    pub stacking_final: TrainedModel,
    pub stacking_threshold: f64,
}

/// A fitted pipeline with the column names it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedPipeline {
    pub embedding: String,
    pub feature_names: Vec<String>,
    pub pipeline: FittedPipeline,
}

impl SavedPipeline {
    /// Reorders `m` to the training columns; unknown features count as 0.
    pub fn align(&self, m: &EmbeddingMatrix) -> Result<Matrix> {
        let index: BTreeMap<&str, usize> = m.feature_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let cols: Vec<Option<usize>> = self.feature_names.iter().map(|n| index.get(n.as_str()).copied()).collect();
        let rows: Vec<Vec<f64>> = m.rows.iter().map(|r| cols.iter().map(|c| c.map_or(0.0, |j| r[j])).collect()).collect();
        let mut x = Matrix::from_rows(&rows)?;
        if rows.is_empty() {
            x = Matrix::zeros(0, self.feature_names.len());
        }
        Ok(x)
    }
}

pub struct RunOutput {
    pub report: RunReport,
    pub commit_ids: Vec<String>,
    pub labels: Vec<u8>,
    pub folds: Vec<u8>,
    /// Out-of-fold probabilities per model name, in column order.
    pub oof: Vec<(String, Vec<f64>)>,
    pub curves: Vec<(String, AveragedCurve)>,
    pub pipelines: Vec<SavedPipeline>,
    pub ensemble: EnsembleModel,
}

fn to_matrix(m: &EmbeddingMatrix) -> Result<Matrix> {
    Matrix::from_rows(&m.rows)
}

fn check_aligned(ms: &[EmbeddingMatrix]) -> Result<()> {
    let first = &ms[0];
    for m in &ms[1..] {
        if m.commit_ids != first.commit_ids || m.labels != first.labels || m.folds != first.folds {
            return Err(Error::Invalid(format!(
                "embeddings {} and {} disagree on commits, labels or folds",
                first.analyzer, m.analyzer
            )));
        }
    }
    Ok(())
}

fn curve_of(cv: &CvResult) -> AveragedCurve {
    average_curves(&cv.folds.iter().map(|f| resample(&f.pr_points)).collect::<Vec<_>>())
}

fn deploy_threshold(y: &[u8], oof: &[f64], min_recall: f64) -> Result<f64> {
    Ok(pick_threshold(&pr_curve(y, oof)?, min_recall)?.threshold)
}

fn summarize(scores: &[Scores]) -> Summary {
    let n = scores.len().max(1) as f64;
    let stat = |g: fn(&Scores) -> f64| {
        let m = scores.iter().map(g).sum::<f64>() / n;
        (m, (scores.iter().map(|s| (g(s) - m).powi(2)).sum::<f64>() / n).sqrt())
    };
    let (p, r, f, a) = (stat(|s| s.precision), stat(|s| s.recall), stat(|s| s.f1), stat(|s| s.accuracy));
    Summary {
        mean: Scores { precision: p.0, recall: r.0, f1: f.0, accuracy: a.0 },
        std: Scores { precision: p.1, recall: r.1, f1: f.1, accuracy: a.1 },
    }
}

fn select_rows(m: &EmbeddingMatrix, rows: &[usize], folds: &[u8]) -> EmbeddingMatrix {
    EmbeddingMatrix {
        analyzer: m.analyzer.clone(),
        feature_names: m.feature_names.clone(),
        commit_ids: rows.iter().map(|&i| m.commit_ids[i].clone()).collect(),
        labels: rows.iter().map(|&i| m.labels[i]).collect(),
        folds: rows.iter().map(|&i| folds[i]).collect(),
        rows: rows.iter().map(|&i| m.rows[i].clone()).collect(),
    }
}

/// Runs the complete selection on all folds but one and scores the chosen
/// voting and stacking ensembles, with their thresholds, on the held-out fold.
fn nested_evaluation(embeddings: &[EmbeddingMatrix], folds: &[u8], k: usize, cfg: &TrainConfig) -> Result<NestedReport> {
    if k < 3 {
        return Err(Error::Invalid("nested evaluation needs at least 3 folds".into()));
    }
    let inner_cfg = TrainConfig { nested: false, folds: FoldSource::External, ..cfg.clone() };
    let mut out = Vec::with_capacity(k);
    for f in 0..k as u8 {
        log::info!("nested evaluation: outer fold {f}");
        let (train_rows, test_rows) = super::folds::split(folds, f);
        // Remaining fold ids renumbered 0..k-1 for the inner run.
        let inner: Vec<u8> = folds.iter().map(|&g| if g > f { g - 1 } else { g }).collect();
        let sub: Vec<EmbeddingMatrix> = embeddings.iter().map(|m| select_rows(m, &train_rows, &inner)).collect();
        let run = fit_run(&sub, &inner_cfg)?;
        let test: Vec<EmbeddingMatrix> = embeddings.iter().map(|m| select_rows(m, &test_rows, folds)).collect();
        let preds = predict_with(&run.pipelines, &run.ensemble, &test)?;
        let y = &test[0].labels;
        let e = &run.ensemble;
        out.push(NestedFold {
            fold: f,
            voting_members: e.bases.iter().zip(&e.voting_weights).filter(|(_, w)| **w == 1).map(|(n, _)| n.clone()).collect(),
            voting_threshold: e.voting_threshold,
            stacking_final: e.stacking_final.spec.algorithm(),
            stacking_threshold: e.stacking_threshold,
            voting: super::curves::evaluate(y, &preds.iter().map(|p| p.voting_positive).collect::<Vec<_>>())?,
            stacking: super::curves::evaluate(y, &preds.iter().map(|p| p.stacking_positive).collect::<Vec<_>>())?,
        });
    }
    let voting = summarize(&out.iter().map(|f| f.voting).collect::<Vec<_>>());
    let stacking = summarize(&out.iter().map(|f| f.stacking).collect::<Vec<_>>());
    Ok(NestedReport { folds: out, voting, stacking })
}

/// Searches every algorithm on every embedding, then the voting and stacking
/// grids over the per-embedding winners. With `cfg.nested` the procedure is
/// repeated once per outer fold to score it on unseen rows.
pub fn train(embeddings: &[EmbeddingMatrix], cfg: &TrainConfig) -> Result<RunOutput> {
    let mut run = fit_run(embeddings, cfg)?;
    if cfg.nested {
        run.report.nested = Some(nested_evaluation(embeddings, &run.folds, run.report.n_folds, cfg)?);
    }
    Ok(run)
}

fn fit_run(embeddings: &[EmbeddingMatrix], cfg: &TrainConfig) -> Result<RunOutput> {
    if embeddings.is_empty() {
        return Err(Error::Invalid("no embeddings to train on".into()));
    }
    if cfg.algorithms.is_empty() {
        return Err(Error::Invalid("no algorithms selected".into()));
    }
    check_aligned(embeddings)?;
    let y = embeddings[0].labels.clone();
    let folds = match cfg.folds {
        FoldSource::External => embeddings[0].folds.clone(),
        FoldSource::Stratified { k } => stratified_kfold(&y, k, cfg.search.seed)?,
    };
    let k = validate_folds(&y, &folds)?;
    let min_recall = cfg.search.min_recall;
    let xs: Vec<Matrix> = embeddings.iter().map(to_matrix).collect::<Result<_>>()?;
    for (m, x) in embeddings.iter().zip(&xs) {
        if x.cols() == 0 {
            return Err(Error::Invalid(format!("embedding {} has no features left", m.analyzer)));
        }
    }

    let names: Vec<String> = embeddings.iter().map(|m| m.analyzer.clone()).collect();
    let mut reports = BTreeMap::new();
    let mut best_candidates = Vec::new();
    let mut base_cv = Vec::new();
    for (e, x) in xs.iter().enumerate() {
        let mut outcomes: Vec<(Algorithm, SearchOutcome)> = Vec::new();
        for (a, alg) in cfg.algorithms.iter().enumerate() {
            log::info!("searching {} on {} ({} draws)", alg, names[e], cfg.search.n_iter);
            let stream = (e as u64) << 8 | a as u64;
            outcomes.push((*alg, random_search(*alg, x, &y, &folds, k, &cfg.search, stream)?));
        }
        let b = select_best(outcomes.iter().map(|(_, o)| &o.cv).enumerate()).expect("at least one algorithm");
        let searches = outcomes
            .iter()
            .map(|(alg, o)| {
                let row = SearchRow { candidate: o.best, draw: o.draw, evaluated: o.evaluated, failed: o.failed, cv: Summary::from(&o.cv) };
                (alg.as_str().to_string(), row)
            })
            .collect();
        let (alg, best) = outcomes.swap_remove(b);
        reports.insert(
            names[e].clone(),
            EmbeddingReport {
                n_features: x.cols(),
                searches,
                best_algorithm: alg,
                best: best.best,
                deploy_threshold: deploy_threshold(&y, &best.cv.oof, min_recall)?,
                cv: best.cv.clone(),
            },
        );
        best_candidates.push(best.best);
        base_cv.push(best.cv);
    }

    let base_oof: Vec<Vec<f64>> = base_cv.iter().map(|c| c.oof.clone()).collect();
    let (voting_entries, vbest) = voting_search(&base_oof, &y, &folds, k, min_recall)?;
    let member_names = |w: &[u8]| names.iter().zip(w).filter(|(_, w)| **w == 1).map(|(n, _)| n.clone()).collect::<Vec<_>>();
    let voting_cv = voting_entries[vbest].cv.clone();
    let voting = VotingReport {
        bases: names.clone(),
        grid_size: voting_entries.len(),
        grid: voting_entries
            .iter()
            .map(|v| VotingRow { members: member_names(&v.weights), weights: v.weights.clone(), cv: Summary::from(&v.cv) })
            .collect(),
        best: vbest,
        deploy_threshold: deploy_threshold(&y, &voting_cv.oof, min_recall)?,
        cv: voting_cv.clone(),
    };

    log::info!("stacking: inner cross-validation of {} bases", names.len());
    let bases: Vec<StackBase<'_>> =
        xs.iter().zip(&best_candidates).zip(&base_oof).map(|((x, c), o)| StackBase { x, candidate: c, oof: o }).collect();
    let meta = meta_folds(&bases, &y, &folds, k)?;
    let grid = stacking_grid(cfg.search.seed);
    let (stack_entries, sbest) = stacking_search(&grid, &meta, &y, &folds, k, min_recall)?;
    let stacking_cv = stack_entries[sbest].cv.clone();
    let stacking = StackingReport {
        bases: names.clone(),
        final_estimators: distinct_final_estimators(&grid),
        grid_size: grid.len(),
        grid: stack_entries.iter().map(|s| StackingRow { final_estimator: s.final_estimator, cv: Summary::from(&s.cv) }).collect(),
        best: sbest,
        deploy_threshold: deploy_threshold(&y, &stacking_cv.oof, min_recall)?,
        cv: stacking_cv.clone(),
    };

    log::info!("fitting final models on all rows");
    let pipelines: Vec<SavedPipeline> = embeddings
        .iter()
        .zip(&xs)
        .zip(&best_candidates)
        .map(|((m, x), c)| {
            Ok(SavedPipeline { embedding: m.analyzer.clone(), feature_names: m.feature_names.clone(), pipeline: FittedPipeline::fit(c, x, &y)? })
        })
        .collect::<Result<_>>()?;
    let outer_meta = Matrix::from_columns(&base_oof)?;
    let stacking_final = fit(&stack_entries[sbest].final_estimator, &outer_meta, &y)?;
    let ensemble = EnsembleModel {
        format: ENSEMBLE_FORMAT.into(),
        version: 1,
        bases: names.clone(),
        voting_weights: voting_entries[vbest].weights.clone(),
        voting_threshold: voting.deploy_threshold,
        stacking_final,
        stacking_threshold: stacking.deploy_threshold,
    };

    let mut comparison = BTreeMap::new();
    let mut oof = Vec::new();
    let mut curves = Vec::new();
    for (n, cv) in names.iter().zip(&base_cv) {
        comparison.insert(n.clone(), Summary::from(cv));
        oof.push((n.clone(), cv.oof.clone()));
        curves.push((n.clone(), curve_of(cv)));
    }
    for (n, cv) in [("voting", &voting_cv), ("stacking", &stacking_cv)] {
        comparison.insert(n.to_string(), Summary::from(cv));
        oof.push((n.to_string(), cv.oof.clone()));
        curves.push((n.to_string(), curve_of(cv)));
    }

    let report = RunReport {
        format: REPORT_FORMAT.into(),
        version: 1,
        config: cfg.clone(),
        n_rows: y.len(),
        n_positives: y.iter().filter(|v| **v == 1).count(),
        n_folds: k,
        embeddings: reports,
        voting,
        stacking,
        comparison,
        nested: None,
    };
    Ok(RunOutput {
        report,
        commit_ids: embeddings[0].commit_ids.clone(),
        labels: y,
        folds,
        oof,
        curves,
        pipelines,
        ensemble,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_curve(path: &Path, c: &AveragedCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["recall_grid", "precision_mean", "precision_std"])?;
    for i in 0..c.recall_grid.len() {
        w.write_record([c.recall_grid[i].to_string(), c.precision_mean[i].to_string(), c.precision_std[i].to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl RunOutput {
    /// Writes `run_report.json`, `oof_scores.csv`, `pr_curves/*.csv` and
    /// `models/*.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let models = dir.join("models");
        let curves = dir.join("pr_curves");
        for d in [dir, &models, &curves] {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        write_json(&dir.join("run_report.json"), &self.report)?;

        let path = dir.join("oof_scores.csv");
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec!["commit_id".to_string(), "label".into(), "test_fold".into()];
        header.extend(self.oof.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        for i in 0..self.commit_ids.len() {
            let mut row = vec![self.commit_ids[i].clone(), self.labels[i].to_string(), self.folds[i].to_string()];
            row.extend(self.oof.iter().map(|(_, s)| s[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        for (n, c) in &self.curves {
            write_curve(&curves.join(format!("{n}.csv")), c)?;
        }
        for p in &self.pipelines {
            write_json(&models.join(format!("{}.json", p.embedding)), p)?;
        }
        write_json(&models.join("ensemble.json"), &self.ensemble)
    }
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub commit_id: String,
    pub base: Vec<f64>,
    pub voting: f64,
    pub voting_positive: bool,
    pub stacking: f64,
    pub stacking_positive: bool,
}

/// Applies saved models to embeddings laid out like the training ones.
pub fn predict(models_dir: &Path, embeddings: &[EmbeddingMatrix]) -> Result<Vec<Prediction>> {
    let read = |p: &Path| -> Result<String> {
        fs::read_to_string(p).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(p.to_path_buf()),
            _ => Error::io(p, e),
        })
    };
    let ensemble: EnsembleModel = serde_json::from_str(&read(&models_dir.join("ensemble.json"))?)?;
    if ensemble.format != ENSEMBLE_FORMAT {
        return Err(Error::Model(format!("unexpected ensemble format {:?}", ensemble.format)));
    }
    let pipelines = ensemble
        .bases
        .iter()
        .map(|name| Ok(serde_json::from_str(&read(&models_dir.join(format!("{name}.json")))?)?))
        .collect::<Result<Vec<SavedPipeline>>>()?;
    predict_with(&pipelines, &ensemble, embeddings)
}

/// [`predict`] with the models already in memory.
pub fn predict_with(pipelines: &[SavedPipeline], ensemble: &EnsembleModel, embeddings: &[EmbeddingMatrix]) -> Result<Vec<Prediction>> {
    let mut probs = Vec::new();
    for name in &ensemble.bases {
        let m = embeddings
            .iter()
            .find(|m| &m.analyzer == name)
            .ok_or_else(|| Error::Invalid(format!("no {name} embedding supplied")))?;
        let saved = pipelines
            .iter()
            .find(|p| &p.embedding == name)
            .ok_or_else(|| Error::Model(format!("no saved pipeline for {name}")))?;
        probs.push(saved.pipeline.predict(&saved.align(m)?)?);
    }
    let ids = &embeddings.iter().find(|m| m.analyzer == ensemble.bases[0]).expect("checked above").commit_ids;
    let voting = soft_vote(&probs, &ensemble.voting_weights)?;
    let stacked = ensemble.stacking_final.predict_proba(&Matrix::from_columns(&probs)?)?;
    Ok((0..ids.len())
        .map(|i| Prediction {
            commit_id: ids[i].clone(),
            base: probs.iter().map(|p| p[i]).collect(),
            voting: voting[i],
            voting_positive: voting[i] >= ensemble.voting_threshold,
            stacking: stacked[i],
            stacking_positive: stacked[i] >= ensemble.stacking_threshold,
        })
        .collect())
}
