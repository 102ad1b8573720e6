//! Command-line front-end: argument parsing, config merging and dispatch.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_embed, cmd_evaluate, cmd_fetch, cmd_ingest, cmd_report, cmd_stats, cmd_synth, cmd_train, metrics_dump, rules_list, Exclusion,
    IngestSummary, Layout, Outcome,
};
pub use config::{AnalyzerToggles, FoldMode, PruneMode, RunConfig, CLONE_ROOT_ENV};

use crate::error::{Error, Result};
use crate::synth::{parse_signal, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "commitscan", version, about = "Static-analysis commit embeddings and security-fix classifiers")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    /// Manifest CSV (repo_url,sha,label,test_fold[,message]).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Directory holding one clone per repository, named by repo slug.
    #[arg(long, global = true, env = CLONE_ROOT_ENV)]
    pub clone_root: Option<PathBuf>,
    /// Output directory for every stage.
    #[arg(long, short = 'o', global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, short = 'j', global = true)]
    pub jobs: Option<usize>,
    /// Comma-separated analyzers to run (lint_strict, lint_style, metrics, graph).
    #[arg(long, global = true, value_delimiter = ',')]
    pub analyzers: Option<Vec<String>>,
    /// Prune constant and duplicate columns inside each training fold
    /// instead of once over the whole matrix.
    #[arg(long, global = true)]
    pub prune_per_fold: bool,
    #[arg(long, short = 'v', global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[arg(long, short = 'q', global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clone or update every manifest repository under the clone root.
    Fetch,
    /// Resolve manifest commits into the snapshot cache.
    Ingest,
    /// Generate a synthetic labeled corpus.
    Synth(SynthArgs),
    /// Build the per-analyzer commit embeddings.
    Embed(EmbedArgs),
    /// Chi-square screen of the embedding features.
    Stats(StatsArgs),
    /// Model search, voting and stacking.
    Train(TrainArgs),
    /// Apply trained models to embeddings.
    Evaluate(EvaluateArgs),
    /// Summary and PR-curve files from a training run.
    Report,
    /// Lint rule catalog.
    Rules {
        #[command(subcommand)]
        action: RulesAction,
    },
    /// Class-level metrics of source files.
    Metrics {
        #[command(subcommand)]
        action: MetricsAction,
    },
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// high, medium, low, none, or a number in [0, 1].
    #[arg(long, default_value = "high")]
    pub signal: String,
    #[arg(long, default_value_t = 4)]
    pub repos: usize,
    #[arg(long, default_value_t = 0.5)]
    pub positive_fraction: f64,
    /// Corpus directory (default: <out>/synth).
    #[arg(long)]
    pub dest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// full or per_fold.
    #[arg(long)]
    pub prune: Option<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub n_iter: Option<usize>,
    #[arg(long)]
    pub min_recall: Option<f64>,
    /// external or stratified.
    #[arg(long)]
    pub folds: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated algorithm names.
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Option<Vec<String>>,
    /// Also run nested cross-validation of the whole selection.
    #[arg(long)]
    pub nested: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory with embedding CSVs to score (default: the training ones).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum RulesAction {
    List,
}

#[derive(Debug, Subcommand)]
pub enum MetricsAction {
    Dump { files: Vec<PathBuf> },
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|_| Error::Config(format!("unknown {what} {s:?}")))
}

/// File values (or defaults) overridden by flags, then validated.
pub fn effective_config(g: &GlobalArgs, command: &Command) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &g.manifest {
        cfg.manifest = v.clone();
    }
    if let Some(v) = &g.clone_root {
        cfg.clone_root = v.clone();
    }
    if let Some(v) = &g.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.jobs {
        cfg.jobs = v;
    }
    if let Some(list) = &g.analyzers {
        let mut t = AnalyzerToggles { lint_strict: false, lint_style: false, metrics: false, graph: false };
        for a in list {
            match crate::embedding::AnalyzerId::parse(a.trim()) {
                Some(crate::embedding::AnalyzerId::LintStrict) => t.lint_strict = true,
                Some(crate::embedding::AnalyzerId::LintStyle) => t.lint_style = true,
                Some(crate::embedding::AnalyzerId::Metrics) => t.metrics = true,
                Some(crate::embedding::AnalyzerId::Graph) => t.graph = true,
                None => return Err(Error::Config(format!("unknown analyzer {a:?}"))),
            }
        }
        cfg.analyzers = t;
    }
    if g.prune_per_fold {
        cfg.embedding.prune = PruneMode::PerFold;
    }
    match command {
        Command::Embed(a) => {
            if let Some(p) = &a.prune {
                cfg.embedding.prune = parse_enum("prune mode", p)?;
            }
        }
        Command::Stats(a) => {
            if let Some(v) = a.alpha {
                cfg.stats.alpha = v;
            }
        }
        Command::Train(a) => {
            if let Some(v) = a.n_iter {
                cfg.ml.n_iter = v;
            }
            if let Some(v) = a.min_recall {
                cfg.ml.min_recall = v;
            }
            if let Some(v) = &a.folds {
                cfg.ml.folds = parse_enum("fold mode", v)?;
            }
            if let Some(v) = a.k {
                cfg.ml.k = v;
            }
            if let Some(v) = &a.algorithms {
                cfg.ml.algorithms = v.clone();
            }
            if a.nested {
                cfg.ml.nested = true;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = effective_config(&cli.global, &cli.command)?;
    if cfg.jobs > 0 {
        // Fails only when a pool already exists, as in repeated in-process calls.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global();
    }
    match &cli.command {
        Command::Fetch => {
            let results = cmd_fetch(&cfg)?;
            let failed: Vec<&String> = results.iter().filter(|(_, r)| r.is_err()).map(|(u, _)| u).collect();
            if !failed.is_empty() {
                return Err(Error::Git { args: "fetch".into(), message: format!("{} of {} repositories failed", failed.len(), results.len()) });
            }
        }
        Command::Ingest => {
            let s = cmd_ingest(&cfg)?;
            println!("{} commits cached, {} excluded", s.included, s.excluded.len());
        }
        Command::Synth(a) => {
            let s = SynthConfig {
                n: a.n,
                signal: parse_signal(&a.signal)?,
                seed: cfg.seed,
                repos: a.repos,
                positive_fraction: a.positive_fraction,
                folds: SynthConfig::default().folds,
            };
            if !(s.positive_fraction > 0.0 && s.positive_fraction < 1.0) {
                return Err(Error::Config(format!("--positive-fraction {} is outside (0, 1)", s.positive_fraction)));
            }
            let dest = a.dest.clone().unwrap_or_else(|| commands::default_synth_dest(&cfg));
            let (_, config) = cmd_synth(&s, &dest)?;
            println!("corpus written to {}; continue with `commitscan --config {} ingest`", dest.display(), config.display());
        }
        Command::Embed(_) => {
            cmd_embed(&cfg)?;
        }
        Command::Stats(_) => {
            cmd_stats(&cfg)?;
        }
        Command::Train(_) => {
            cmd_train(&cfg)?;
        }
        Command::Evaluate(a) => {
            let s = cmd_evaluate(&cfg, a.embeddings.as_deref())?;
            println!(
                "{} rows: voting precision {:.4} recall {:.4}; stacking precision {:.4} recall {:.4}",
                s.rows, s.voting.precision, s.voting.recall, s.stacking.precision, s.stacking.recall
            );
        }
        Command::Report => {
            let p = cmd_report(&cfg)?;
            println!("{}", p.display());
        }
        Command::Rules { action: RulesAction::List } => {
            rules_list(&mut std::io::stdout().lock()).map_err(|e| Error::io("stdout", e))?;
        }
        Command::Metrics { action: MetricsAction::Dump { files } } => {
            metrics_dump(files, std::io::stdout().lock())?;
        }
        Command::Config => print!("{}", cfg.to_toml()?),
    }
    Ok(())
}
