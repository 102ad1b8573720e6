//! The pipeline stages. Each reads the previous stage's files under the
//! output directory and skips itself when its inputs hash to the recorded
//! stamp.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{PruneMode, RunConfig};
use crate::corpus::{fetch_mirror, load_manifest, read_snapshot, repo_slug, write_manifest, write_snapshot, CommitRecord, Repo};
use crate::embedding::{commit_embedding, prune_columns, Analyzer, AnalyzerId, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::lint::Catalog;
use crate::pipeline::{evaluate, predict, read_report, train, RunReport, Scores};
use crate::stats::{association_report_at, write_report_csv};
use crate::synth::{self, SynthConfig};

/// Where every stage reads and writes, relative to the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }
    pub fn cache(&self) -> PathBuf {
        self.root.join("cache")
    }
    pub fn snapshots(&self) -> PathBuf {
        self.cache().join("snapshots")
    }
    pub fn cached_manifest(&self) -> PathBuf {
        self.cache().join("manifest.csv")
    }
    pub fn exclusions(&self) -> PathBuf {
        self.cache().join("exclusions.csv")
    }
    pub fn embeddings(&self) -> PathBuf {
        self.root.join("embeddings")
    }
    pub fn embedding(&self, a: AnalyzerId) -> PathBuf {
        self.embeddings().join(format!("{a}.csv"))
    }
    pub fn stats(&self) -> PathBuf {
        self.root.join("stats")
    }
    pub fn train(&self) -> PathBuf {
        self.root.join("train")
    }
    pub fn run_report(&self) -> PathBuf {
        self.train().join("run_report.json")
    }
    pub fn models(&self) -> PathBuf {
        self.train().join("models")
    }
    pub fn evaluate(&self) -> PathBuf {
        self.root.join("evaluate")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

fn require(path: &Path, producer: &'static str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingStage { path: path.to_path_buf(), producer })
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Content hash over length-prefixed parts.
#[derive(Default)]
struct Stamp(Sha256);

impl Stamp {
    fn add(&mut self, part: impl AsRef<[u8]>) -> &mut Self {
        let b = part.as_ref();
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }
    fn add_json<T: Serialize>(&mut self, v: &T) -> Result<&mut Self> {
        Ok(self.add(serde_json::to_vec(v)?))
    }
    fn add_file(&mut self, p: &Path) -> Result<&mut Self> {
        let bytes = read_bytes(p)?;
        Ok(self.add(bytes))
    }
    fn hex(self) -> String {
        self.0.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

const STAMP_FILE: &str = ".stamp";

fn is_current(dir: &Path, key: &str, outputs: &[PathBuf]) -> bool {
    fs::read_to_string(dir.join(STAMP_FILE)).map(|s| s.trim() == key).unwrap_or(false) && outputs.iter().all(|p| p.exists())
}

fn write_stamp(dir: &Path, key: &str) -> Result<()> {
    let p = dir.join(STAMP_FILE);
    fs::write(&p, format!("{key}\n")).map_err(|e| Error::io(&p, e))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Whether a stage ran or found its outputs current.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    UpToDate,
}

/// Mirrors every manifest repository into the clone root. Failures are
/// reported per repository.
pub fn cmd_fetch(cfg: &RunConfig) -> Result<BTreeMap<String, Result<()>>> {
    let records = load_manifest(&cfg.manifest)?;
    let mut urls: Vec<&str> = records.iter().map(|r| r.repo_url.as_str()).collect();
    urls.sort_unstable();
    urls.dedup();
    let mut out = BTreeMap::new();
    for url in urls {
        let dest = cfg.clone_root.join(repo_slug(url));
        let r = fetch_mirror(url, &dest);
        match &r {
            Ok(()) => log::info!("fetched {url} into {}", dest.display()),
            Err(e) => log::error!("{url}: {e}"),
        }
        out.insert(url.to_string(), r);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exclusion {
    pub repo_url: String,
    pub sha: String,
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestSummary {
    pub outcome: Outcome,
    pub included: usize,
    pub excluded: Vec<Exclusion>,
}

fn repo_state(path: &Path) -> String {
    Repo::open(path).and_then(|r| r.git(&["show-ref"])).map(|b| String::from_utf8_lossy(&b).into_owned()).unwrap_or_default()
}

fn read_exclusions(path: &Path) -> Result<Vec<Exclusion>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|row| {
            let row = row?;
            Ok(Exclusion { repo_url: row[0].into(), sha: row[1].into(), reason: row[2].into(), detail: row[3].into() })
        })
        .collect()
}

/// Resolves every manifest commit into the snapshot cache and records why
/// the others were left out.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    let layout = Layout::new(&cfg.out_dir);
    let records = load_manifest(&cfg.manifest)?;
    let mut urls: Vec<&str> = records.iter().map(|r| r.repo_url.as_str()).collect();
    urls.sort_unstable();
    urls.dedup();

    let mut stamp = Stamp::default();
    stamp.add("ingest").add_file(&cfg.manifest)?;
    stamp.add_json(&(&cfg.embedding.extensions, cfg.embedding.min_files, cfg.embedding.max_files))?;
    for url in &urls {
        stamp.add(url).add(repo_state(&cfg.clone_root.join(repo_slug(url))));
    }
    let key = stamp.hex();
    let cache = layout.cache();
    if is_current(&cache, &key, &[layout.cached_manifest(), layout.exclusions()]) {
        log::info!("ingest: cache is up to date");
        let included = load_manifest(&layout.cached_manifest())?.len();
        return Ok(IngestSummary { outcome: Outcome::UpToDate, included, excluded: read_exclusions(&layout.exclusions())? });
    }

    let mut repos: BTreeMap<&str, std::result::Result<Repo, String>> = BTreeMap::new();
    for url in &urls {
        let path = cfg.clone_root.join(repo_slug(url));
        let r = Repo::open(&path).map_err(|e| {
            log::error!("{url}: no usable clone at {}: {e}", path.display());
            format!("{}: {e}", path.display())
        });
        repos.insert(url, r);
    }

    let snapshots = layout.snapshots();
    if snapshots.exists() {
        fs::remove_dir_all(&snapshots).map_err(|e| Error::io(&snapshots, e))?;
    }
    mkdir(&snapshots)?;
    let ext = &cfg.embedding.extensions;
    let results: Vec<std::result::Result<(), (String, String)>> = records
        .par_iter()
        .map(|rec| {
            let repo = match &repos[rec.repo_url.as_str()] {
                Ok(r) => r,
                Err(e) => return Err(("missing_clone".into(), e.clone())),
            };
            let snap = match repo.resolve_commit(rec, ext) {
                Ok(s) => s,
                Err(Error::UnreachableCommit { .. }) => return Err(("unreachable".into(), String::new())),
                Err(e) => return Err(("error".into(), e.to_string())),
            };
            let n = snap.files.len();
            if n < cfg.embedding.min_files {
                return Err(("empty".into(), format!("{n} changed source files")));
            }
            if n > cfg.embedding.max_files {
                return Err(("oversized".into(), format!("{n} changed source files")));
            }
            write_snapshot(&snapshots, &snap).map(|_| ()).map_err(|e| ("error".into(), e.to_string()))
        })
        .collect();

    let mut included: Vec<CommitRecord> = Vec::new();
    let mut excluded = Vec::new();
    for (rec, r) in records.iter().zip(results) {
        match r {
            Ok(()) => included.push(rec.clone()),
            Err((reason, detail)) => {
                log::warn!("excluded {} {}: {reason}", rec.repo_url, rec.sha);
                excluded.push(Exclusion { repo_url: rec.repo_url.clone(), sha: rec.sha.clone(), reason, detail });
            }
        }
    }
    write_manifest(&layout.cached_manifest(), &included)?;
    let path = layout.exclusions();
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["repo_url", "sha", "reason", "detail"])?;
    for e in &excluded {
        w.write_record([&e.repo_url, &e.sha, &e.reason, &e.detail])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_stamp(&cache, &key)?;
    log::info!("ingest: {} cached, {} excluded", included.len(), excluded.len());
    Ok(IngestSummary { outcome: Outcome::Ran, included: included.len(), excluded })
}

/// Builds one embedding CSV per enabled analyzer from the snapshot cache.
pub fn cmd_embed(cfg: &RunConfig) -> Result<Outcome> {
    let layout = Layout::new(&cfg.out_dir);
    let manifest = layout.cached_manifest();
    require(&manifest, "ingest")?;
    let analyzers = cfg.analyzers.enabled();
    let mut stamp = Stamp::default();
    stamp.add("embed").add_file(&manifest)?.add_file(&layout.cache().join(STAMP_FILE))?;
    stamp.add_json(&(&analyzers, &cfg.embedding.thresholds, cfg.embedding.prune))?;
    let key = stamp.hex();
    let dir = layout.embeddings();
    let outputs: Vec<PathBuf> = analyzers.iter().map(|a| layout.embedding(*a)).collect();
    if is_current(&dir, &key, &outputs) {
        log::info!("embed: embeddings are up to date");
        return Ok(Outcome::UpToDate);
    }
    mkdir(&dir)?;

    let records = load_manifest(&manifest)?;
    let snapshots = layout.snapshots();
    let snaps = records.par_iter().map(|r| read_snapshot(&snapshots, r)).collect::<Result<Vec<_>>>()?;
    let mut pruned = csv::Writer::from_path(dir.join("pruned.csv"))?;
    pruned.write_record(["analyzer", "feature", "reason", "kept_as"])?;
    for a in analyzers {
        let analyzer = Analyzer::new(a, cfg.embedding.thresholds);
        let rows = snaps.par_iter().map(|s| commit_embedding(s, &analyzer)).collect::<Result<Vec<_>>>()?;
        let names = rows.first().map(|v| v.names().to_vec()).unwrap_or_else(|| crate::embedding::aggregated_names(&analyzer.feature_names()));
        let mut m = EmbeddingMatrix::new(a.as_str(), names);
        for (rec, v) in records.iter().zip(rows) {
            m.push(rec.commit_id(), rec.label, rec.test_fold, v.values().to_vec())?;
        }
        let m = match cfg.embedding.prune {
            PruneMode::Full => {
                let p = prune_columns(&m);
                for f in &p.constant {
                    pruned.write_record([a.as_str(), f, "constant", ""])?;
                }
                for (d, k) in &p.duplicates {
                    pruned.write_record([a.as_str(), d, "duplicate", k])?;
                }
                log::info!("embed: {a}: {} of {} columns kept", p.matrix.n_cols(), m.n_cols());
                p.matrix
            }
            PruneMode::PerFold => m,
        };
        m.write_csv(&layout.embedding(a))?;
    }
    pruned.flush().map_err(|e| Error::io(&dir, e))?;
    let mode = match cfg.embedding.prune {
        PruneMode::Full => "full",
        PruneMode::PerFold => "per_fold",
    };
    let mode_path = dir.join("prune_mode");
    fs::write(&mode_path, format!("{mode}\n")).map_err(|e| Error::io(&mode_path, e))?;
    write_stamp(&dir, &key)?;
    Ok(Outcome::Ran)
}

fn load_embeddings(cfg: &RunConfig, layout: &Layout) -> Result<Vec<EmbeddingMatrix>> {
    cfg.analyzers
        .enabled()
        .into_iter()
        .map(|a| {
            let p = layout.embedding(a);
            require(&p, "embed")?;
            EmbeddingMatrix::read_csv(&p, a.as_str())
        })
        .collect()
}

fn embeddings_stamp(stamp: &mut Stamp, cfg: &RunConfig, layout: &Layout) -> Result<()> {
    for a in cfg.analyzers.enabled() {
        let p = layout.embedding(a);
        require(&p, "embed")?;
        stamp.add(a.as_str()).add_file(&p)?;
    }
    Ok(())
}

/// Chi-square screen of every embedding column.
pub fn cmd_stats(cfg: &RunConfig) -> Result<Outcome> {
    let layout = Layout::new(&cfg.out_dir);
    let mut stamp = Stamp::default();
    stamp.add("stats");
    embeddings_stamp(&mut stamp, cfg, &layout)?;
    stamp.add_json(&cfg.stats)?;
    let key = stamp.hex();
    let dir = layout.stats();
    let summary_path = dir.join("summary.csv");
    if is_current(&dir, &key, std::slice::from_ref(&summary_path)) {
        log::info!("stats: reports are up to date");
        return Ok(Outcome::UpToDate);
    }
    mkdir(&dir)?;
    let mut summary = csv::Writer::from_path(&summary_path)?;
    let mut header_written = false;
    for m in load_embeddings(cfg, &layout)? {
        let a = AnalyzerId::parse(&m.analyzer).expect("enabled analyzer");
        let report = association_report_at(&m, cfg.stats.bins_for(a), cfg.stats.alpha);
        write_report_csv(&dir.join(format!("{a}.csv")), &report)?;
        let s = report.summary();
        if !header_written {
            let mut h = vec!["analyzer".to_string()];
            h.extend(s.keys().cloned());
            summary.write_record(&h)?;
            header_written = true;
        }
        let mut row = vec![a.as_str().to_string()];
        row.extend(s.values().map(|v| v.to_string()));
        summary.write_record(&row)?;
        log::info!("stats: {a}: {} of {} tested features significant", s["significant"], s["tested"]);
    }
    summary.flush().map_err(|e| Error::io(&summary_path, e))?;
    write_stamp(&dir, &key)?;
    Ok(Outcome::Ran)
}

/// Model search, ensembles and final fits.
pub fn cmd_train(cfg: &RunConfig) -> Result<Outcome> {
    let layout = Layout::new(&cfg.out_dir);
    let mut train_cfg = cfg.train_config()?;
    // Unpruned embeddings must be pruned inside each fold, whatever the config says now.
    if fs::read_to_string(layout.embeddings().join("prune_mode")).is_ok_and(|m| m.trim() == "per_fold") {
        train_cfg.search.prune_per_fold = true;
    }
    let mut stamp = Stamp::default();
    stamp.add("train");
    embeddings_stamp(&mut stamp, cfg, &layout)?;
    stamp.add_json(&train_cfg)?;
    let key = stamp.hex();
    let dir = layout.train();
    if is_current(&dir, &key, &[layout.run_report(), layout.models().join("ensemble.json")]) {
        log::info!("train: models are up to date");
        return Ok(Outcome::UpToDate);
    }
    let ms = load_embeddings(cfg, &layout)?;
    let out = train(&ms, &train_cfg)?;
    out.write(&dir)?;
    write_stamp(&dir, &key)?;
    let v = &out.report.voting.cv.mean;
    log::info!("train: voting precision {:.4}, recall {:.4}", v.precision, v.recall);
    if let Some(n) = &out.report.nested {
        log::info!("train: nested voting precision {:.4}, recall {:.4}", n.voting.mean.precision, n.voting.mean.recall);
    }
    Ok(Outcome::Ran)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationScores {
    pub rows: usize,
    pub voting: Scores,
    pub stacking: Scores,
}

/// Applies the trained models to embedding CSVs (the training ones unless
/// `embeddings_dir` is given) and writes `predictions.csv` and `scores.json`.
pub fn cmd_evaluate(cfg: &RunConfig, embeddings_dir: Option<&Path>) -> Result<EvaluationScores> {
    let layout = Layout::new(&cfg.out_dir);
    require(&layout.models().join("ensemble.json"), "train")?;
    let ms: Vec<EmbeddingMatrix> = cfg
        .analyzers
        .enabled()
        .into_iter()
        .map(|a| {
            let p = embeddings_dir.map(|d| d.join(format!("{a}.csv"))).unwrap_or_else(|| layout.embedding(a));
            require(&p, "embed")?;
            EmbeddingMatrix::read_csv(&p, a.as_str())
        })
        .collect::<Result<_>>()?;
    let preds = predict(&layout.models(), &ms)?;
    let labels: BTreeMap<&str, u8> = ms[0].commit_ids.iter().map(String::as_str).zip(ms[0].labels.iter().copied()).collect();
    let dir = layout.evaluate();
    mkdir(&dir)?;
    let path = dir.join("predictions.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let ensemble: crate::pipeline::EnsembleModel = serde_json::from_slice(&read_bytes(&layout.models().join("ensemble.json"))?)?;
    let mut header = vec!["commit_id".to_string(), "label".into()];
    header.extend(ensemble.bases.iter().cloned());
    header.extend(["voting", "voting_positive", "stacking", "stacking_positive"].map(String::from));
    w.write_record(&header)?;
    for p in &preds {
        let mut row = vec![p.commit_id.clone(), labels[p.commit_id.as_str()].to_string()];
        row.extend(p.base.iter().map(|v| v.to_string()));
        row.extend([p.voting.to_string(), p.voting_positive.to_string(), p.stacking.to_string(), p.stacking_positive.to_string()]);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let y: Vec<u8> = preds.iter().map(|p| labels[p.commit_id.as_str()]).collect();
    let scores = EvaluationScores {
        rows: preds.len(),
        voting: evaluate(&y, &preds.iter().map(|p| p.voting_positive).collect::<Vec<_>>())?,
        stacking: evaluate(&y, &preds.iter().map(|p| p.stacking_positive).collect::<Vec<_>>())?,
    };
    write_json(&dir.join("scores.json"), &scores)?;
    Ok(scores)
}

fn pct(mean: f64, std: f64) -> String {
    format!("{:.2} ± {:.2}", 100.0 * mean, 100.0 * std)
}

fn summary_markdown(r: &RunReport, stats: Option<String>) -> String {
    let mut s = String::new();
    let line = |s: &mut String, t: String| {
        s.push_str(&t);
        s.push('\n');
    };
    line(&mut s, "# Run summary\n".into());
    line(&mut s, format!("{} commits ({} positive), {} folds.\n", r.n_rows, r.n_positives, r.n_folds));
    line(&mut s, "## Per-embedding best models\n".into());
    line(&mut s, "| embedding | features | algorithm | precision | recall | F1 | accuracy |".into());
    line(&mut s, "|---|---|---|---|---|---|---|".into());
    for (name, e) in &r.embeddings {
        let (m, d) = (&e.cv.mean, &e.cv.std);
        line(
            &mut s,
            format!(
                "| {name} | {} | {} | {} | {} | {} | {} |",
                e.n_features,
                e.best_algorithm,
                pct(m.precision, d.precision),
                pct(m.recall, d.recall),
                pct(m.f1, d.f1),
                pct(m.accuracy, d.accuracy)
            ),
        );
    }
    let v = &r.voting;
    let best = &v.grid[v.best];
    line(&mut s, "\n## Ensembles\n".into());
    line(&mut s, "| model | members | precision | recall | F1 | accuracy |".into());
    line(&mut s, "|---|---|---|---|---|---|".into());
    let row = |name: &str, members: String, cv: &crate::pipeline::CvResult| {
        let (m, d) = (&cv.mean, &cv.std);
        format!(
            "| {name} | {members} | {} | {} | {} | {} |",
            pct(m.precision, d.precision),
            pct(m.recall, d.recall),
            pct(m.f1, d.f1),
            pct(m.accuracy, d.accuracy)
        )
    };
    line(&mut s, row("voting", best.members.join(" + "), &v.cv));
    let st = &r.stacking;
    line(&mut s, row("stacking", format!("final {}", st.grid[st.best].final_estimator.algorithm()), &st.cv));
    line(&mut s, format!("\nVoting grid: {} combinations. Stacking grid: {} final estimators, {} configurations.", v.grid_size, st.final_estimators, st.grid_size));
    line(&mut s, format!("Operating points picked at recall ≥ {}.", r.config.search.min_recall));
    if let Some(t) = stats {
        line(&mut s, "\n## Significant features\n".into());
        s.push_str(&t);
    }
    s
}

fn stats_table(path: &Path) -> Result<Option<String>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let mut t = format!("| {} |\n|{}\n", header.join(" | "), "---|".repeat(header.len()));
    for row in r.records() {
        let row = row?;
        t.push_str(&format!("| {} |\n", row.iter().collect::<Vec<_>>().join(" | ")));
    }
    Ok(Some(t))
}

/// Human-readable summary plus the averaged PR-curve CSVs.
pub fn cmd_report(cfg: &RunConfig) -> Result<PathBuf> {
    let layout = Layout::new(&cfg.out_dir);
    require(&layout.run_report(), "train")?;
    let report = read_report(&layout.run_report())?;
    let dir = layout.report();
    let curves = dir.join("pr_curves");
    mkdir(&curves)?;
    let src = layout.train().join("pr_curves");
    let mut entries: Vec<_> = fs::read_dir(&src).map_err(|e| Error::io(&src, e))?.collect::<std::io::Result<_>>().map_err(|e| Error::io(&src, e))?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let to = curves.join(e.file_name());
        fs::copy(e.path(), &to).map_err(|err| Error::io(&to, err))?;
    }
    let path = dir.join("comparison.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["model", "precision_mean", "precision_std", "recall_mean", "recall_std", "f1_mean", "f1_std", "accuracy_mean", "accuracy_std"])?;
    for (name, s) in &report.comparison {
        let (m, d) = (&s.mean, &s.std);
        w.write_record([name.clone()].into_iter().chain(
            [m.precision, d.precision, m.recall, d.recall, m.f1, d.f1, m.accuracy, d.accuracy].iter().map(|v| v.to_string()),
        ))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let md = dir.join("summary.md");
    fs::write(&md, summary_markdown(&report, stats_table(&layout.stats().join("summary.csv"))?)).map_err(|e| Error::io(&md, e))?;
    Ok(md)
}

/// Generates the synthetic corpus plus a config pointing at it.
pub fn cmd_synth(s: &SynthConfig, dest: &Path) -> Result<(Outcome, PathBuf)> {
    let config_path = dest.join("commitscan.toml");
    let mut stamp = Stamp::default();
    stamp.add("synth").add_json(s)?;
    let key = stamp.hex();
    if is_current(dest, &key, &[dest.join("manifest.csv"), dest.join("synth.json"), config_path.clone()]) {
        log::info!("synth: corpus at {} is up to date", dest.display());
        return Ok((Outcome::UpToDate, config_path));
    }
    mkdir(dest)?;
    let summary = synth::generate(s, dest)?;
    let cfg = RunConfig {
        manifest: "manifest.csv".into(),
        clone_root: "repos".into(),
        out_dir: "run".into(),
        seed: s.seed,
        ..RunConfig::default()
    };
    fs::write(&config_path, cfg.to_toml()?).map_err(|e| Error::io(&config_path, e))?;
    write_stamp(dest, &key)?;
    log::info!("synth: {} commits ({} positive, {} planted) in {}", s.n, summary.positives, summary.planted_commits, dest.display());
    Ok((Outcome::Ran, config_path))
}

pub fn rules_list(out: &mut impl Write) -> std::io::Result<()> {
    let style = Catalog::style();
    writeln!(out, "{:<24}{:<13}{:<14}{:<11}description", "rule", "category", "catalogs", "threshold")?;
    for r in Catalog::strict().rules {
        let catalogs = if style.rule(r.id).is_some() { "strict,style" } else { "strict" };
        let threshold = r.threshold.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
        writeln!(out, "{:<24}{:<13}{:<14}{:<11}{}", r.id, r.category.as_str(), catalogs, threshold, r.description)?;
    }
    Ok(())
}

/// Class-level metric rows of the given source files as CSV.
pub fn metrics_dump(files: &[PathBuf], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["file".to_string(), "class".into(), "type".into()];
    header.extend(crate::metrics::METRIC_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for f in files {
        let text = fs::read_to_string(f).map_err(|e| Error::io(f, e))?;
        let name = f.display().to_string();
        let ast = crate::parser::parse_file(&text).map_err(|e| Error::Invalid(format!("{name}: {e}")))?;
        for row in crate::metrics::class_metrics(&ast, &name) {
            let mut rec = vec![row.file.clone(), row.class_name.clone(), row.class_type.as_str().to_string()];
            rec.extend(crate::metrics::METRIC_NAMES.iter().map(|m| row.metrics.get(*m).copied().unwrap_or(0.0).to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(())
}

pub fn default_synth_dest(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join(synth::default_out_dir())
}
