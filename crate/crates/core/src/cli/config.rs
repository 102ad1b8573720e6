//! The TOML run configuration. Relative paths resolve against the config
//! file's directory; command-line flags override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::DEFAULT_KEYWORDS;
use crate::embedding::AnalyzerId;
use crate::error::{Error, Result};
use crate::learners::Algorithm;
use crate::lint::Thresholds;
use crate::pipeline::{FoldSource, SearchConfig, TrainConfig};
use crate::stats::ALPHA;

pub const CLONE_ROOT_ENV: &str = "COMMITSCAN_CLONE_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub clone_root: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub analyzers: AnalyzerToggles,
    pub embedding: EmbeddingOptions,
    pub stats: StatsOptions,
    pub ml: MlOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: "manifest.csv".into(),
            clone_root: "repos".into(),
            out_dir: "out".into(),
            seed: 0,
            jobs: 0,
            analyzers: AnalyzerToggles::default(),
            embedding: EmbeddingOptions::default(),
            stats: StatsOptions::default(),
            ml: MlOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzerToggles {
    pub lint_strict: bool,
    pub lint_style: bool,
    pub metrics: bool,
    pub graph: bool,
}

impl Default for AnalyzerToggles {
    fn default() -> Self {
        AnalyzerToggles { lint_strict: true, lint_style: true, metrics: true, graph: true }
    }
}

impl AnalyzerToggles {
    pub fn enabled(&self) -> Vec<AnalyzerId> {
        AnalyzerId::ALL
            .into_iter()
            .filter(|a| match a {
                AnalyzerId::LintStrict => self.lint_strict,
                AnalyzerId::LintStyle => self.lint_style,
                AnalyzerId::Metrics => self.metrics,
                AnalyzerId::Graph => self.graph,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneMode {
    /// Once over all commits, before training.
    Full,
    /// Inside each training split.
    PerFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingOptions {
    pub prune: PruneMode,
    pub extensions: Vec<String>,
    pub min_files: usize,
    pub max_files: usize,
    pub keywords: Vec<String>,
    pub thresholds: Thresholds,
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        EmbeddingOptions {
            prune: PruneMode::Full,
            extensions: vec![".java".into()],
            min_files: 1,
            max_files: 100,
            keywords: DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsOptions {
    pub alpha: f64,
    /// Per-analyzer overrides of the bin cap.
    pub max_bins: BTreeMap<String, usize>,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions { alpha: ALPHA, max_bins: BTreeMap::new() }
    }
}

impl StatsOptions {
    pub fn bins_for(&self, a: AnalyzerId) -> usize {
        self.max_bins.get(a.as_str()).copied().unwrap_or_else(|| a.default_max_bins())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldMode {
    External,
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlOptions {
    pub n_iter: usize,
    pub min_recall: f64,
    pub folds: FoldMode,
    pub k: usize,
    pub variance_threshold: f64,
    pub r_max: f64,
    pub algorithms: Vec<String>,
    /// Score the selection procedure itself by nested cross-validation.
    pub nested: bool,
}

impl Default for MlOptions {
    fn default() -> Self {
        let s = SearchConfig::default();
        MlOptions {
            n_iter: s.n_iter,
            min_recall: s.min_recall,
            folds: FoldMode::External,
            k: 5,
            variance_threshold: s.variance_threshold,
            r_max: s.r_max,
            algorithms: Algorithm::ALL.iter().map(|a| a.as_str().to_string()).collect(),
            nested: false,
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Reads a config file, rejecting unknown keys.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.manifest = resolve(base, &cfg.manifest);
        cfg.clone_root = resolve(base, &cfg.clone_root);
        cfg.out_dir = resolve(base, &cfg.out_dir);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.analyzers.enabled().is_empty() {
            return bad("every analyzer is disabled".into());
        }
        let e = &self.embedding;
        if e.extensions.is_empty() || e.extensions.iter().any(|x| x.is_empty()) {
            return bad("embedding.extensions must list non-empty suffixes".into());
        }
        if e.min_files > e.max_files {
            return bad(format!("embedding.min_files {} exceeds max_files {}", e.min_files, e.max_files));
        }
        let s = &self.stats;
        if !(s.alpha > 0.0 && s.alpha < 1.0) {
            return bad(format!("stats.alpha {} is outside (0, 1)", s.alpha));
        }
        for (k, v) in &s.max_bins {
            if AnalyzerId::parse(k).is_none() {
                return bad(format!("stats.max_bins: unknown analyzer {k:?}"));
            }
            if *v < 1 {
                return bad(format!("stats.max_bins.{k} must be at least 1"));
            }
        }
        let m = &self.ml;
        if m.n_iter == 0 {
            return bad("ml.n_iter must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&m.min_recall) {
            return bad(format!("ml.min_recall {} is outside [0, 1]", m.min_recall));
        }
        if m.k < 2 {
            return bad("ml.k must be at least 2".into());
        }
        if m.variance_threshold < 0.0 || !m.variance_threshold.is_finite() {
            return bad("ml.variance_threshold must be a non-negative number".into());
        }
        if !(m.r_max > 0.0 && m.r_max <= 1.0) {
            return bad(format!("ml.r_max {} is outside (0, 1]", m.r_max));
        }
        if m.algorithms.is_empty() {
            return bad("ml.algorithms is empty".into());
        }
        for a in &m.algorithms {
            Algorithm::parse(a).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let algorithms = self.ml.algorithms.iter().map(|a| Algorithm::parse(a)).collect::<Result<Vec<_>>>()?;
        Ok(TrainConfig {
            search: SearchConfig {
                n_iter: self.ml.n_iter,
                seed: self.seed,
                min_recall: self.ml.min_recall,
                variance_threshold: self.ml.variance_threshold,
                r_max: self.ml.r_max,
                prune_per_fold: self.embedding.prune == PruneMode::PerFold,
            },
            algorithms,
            folds: match self.ml.folds {
                FoldMode::External => FoldSource::External,
                FoldMode::Stratified => FoldSource::Stratified { k: self.ml.k },
            },
            nested: self.ml.nested,
        })
    }
}
