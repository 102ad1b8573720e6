use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use commitscan::cli::{cmd_ingest, Outcome, RunConfig};
use commitscan::corpus::{load_manifest, repo_slug};

fn git(dir: &Path, args: &[&str]) -> String {
    let out = Command::new("git")
        .args(["-c", "user.name=t", "-c", "user.email=t@example.com", "-c", "commit.gpgsign=false"])
        .args(args)
        .current_dir(dir)
        .env("GIT_AUTHOR_DATE", "2021-01-01T00:00:00Z")
        .env("GIT_COMMITTER_DATE", "2021-01-01T00:00:00Z")
        .output()
        .unwrap();
    assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().trim().to_string()
}

fn commit_file(dir: &Path, rel: &str, text: &str, msg: &str) -> String {
    let p = dir.join(rel);
    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
    std::fs::write(p, text).unwrap();
    git(dir, &["add", "-A"]);
    git(dir, &["commit", "-q", "-m", msg]);
    git(dir, &["rev-parse", "HEAD"])
}

const URL: &str = "https://example.com/acme/widget.git";

/// A clone under `root/<slug>` with five reachable commits touching Java
/// files plus `extra` (path, text) commits, and one commit only a deleted
/// branch pointed to.
fn fixture(root: &Path, extra: &[(&str, &str)]) -> (Vec<String>, String) {
    let dir = root.join("clones").join(repo_slug(URL));
    std::fs::create_dir_all(&dir).unwrap();
    git(&dir, &["init", "-q", "-b", "main"]);
    let mut shas = Vec::new();
    for i in 0..5 {
        let body = format!("class C{i} {{\n  int f(int x) {{\n    return x + {i};\n  }}\n}}\n");
        shas.push(commit_file(&dir, &format!("src/C{i}.java"), &body, &format!("change {i}")));
    }
    for (p, t) in extra {
        shas.push(commit_file(&dir, p, t, "extra"));
    }
    git(&dir, &["checkout", "-q", "-b", "doomed"]);
    let lost = commit_file(&dir, "src/Lost.java", "class Lost {}\n", "lost");
    git(&dir, &["checkout", "-q", "main"]);
    git(&dir, &["branch", "-q", "-D", "doomed"]);
    (shas, lost)
}

fn write_manifest(path: &Path, shas: &[&str]) {
    let mut s = String::from("repo_url,sha,label,test_fold\n");
    for (i, sha) in shas.iter().enumerate() {
        s.push_str(&format!("{URL},{sha},{},{}\n", i % 2, i % 5));
    }
    std::fs::write(path, s).unwrap();
}

fn config(root: &Path) -> RunConfig {
    RunConfig {
        manifest: root.join("manifest.csv"),
        clone_root: root.join("clones"),
        out_dir: root.join("out"),
        ..RunConfig::default()
    }
}

#[test]
fn ingest_reports_unreachable_and_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let (shas, lost) = fixture(tmp.path(), &[]);
    let mut all: Vec<&str> = shas.iter().map(String::as_str).collect();
    all.insert(2, &lost);
    write_manifest(&tmp.path().join("manifest.csv"), &all);
    let cfg = config(tmp.path());

    let s = cmd_ingest(&cfg).unwrap();
    assert_eq!((s.outcome, s.included, s.excluded.len()), (Outcome::Ran, 5, 1));
    assert_eq!(s.excluded[0].sha, lost);
    assert_eq!(s.excluded[0].reason, "unreachable");
    let cached = load_manifest(&cfg.out_dir.join("cache/manifest.csv")).unwrap();
    assert_eq!(cached.len(), 5);
    assert!(cached.iter().all(|r| cfg.out_dir.join("cache/snapshots").join(r.commit_id()).join("post").is_dir()));

    let before = std::fs::read(cfg.out_dir.join("cache/exclusions.csv")).unwrap();
    let again = cmd_ingest(&cfg).unwrap();
    assert_eq!(again.outcome, Outcome::UpToDate);
    assert_eq!((again.included, again.excluded), (5, s.excluded));
    assert_eq!(std::fs::read(cfg.out_dir.join("cache/exclusions.csv")).unwrap(), before);
}

#[test]
fn ingest_filters_empty_oversized_and_missing_clones() {
    let tmp = tempfile::tempdir().unwrap();
    let (shas, _) = fixture(tmp.path(), &[("README.md", "docs\n")]);
    let mut text = String::from("repo_url,sha,label,test_fold\n");
    for (i, s) in shas.iter().enumerate() {
        text.push_str(&format!("{URL},{s},{},{}\n", i % 2, i % 5));
    }
    text.push_str(&format!("https://example.com/acme/absent.git,{},1,0\n", "a".repeat(40)));
    std::fs::write(tmp.path().join("manifest.csv"), text).unwrap();
    let mut cfg = config(tmp.path());
    let s = cmd_ingest(&cfg).unwrap();
    let reasons: Vec<&str> = s.excluded.iter().map(|e| e.reason.as_str()).collect();
    assert_eq!(s.included, 5);
    assert_eq!(reasons, ["empty", "missing_clone"]);

    cfg.embedding.max_files = 0;
    cfg.embedding.min_files = 0;
    let s = cmd_ingest(&cfg).unwrap();
    assert_eq!(s.excluded.iter().filter(|e| e.reason == "oversized").count(), 5);
}

#[test]
fn empty_manifest_gives_empty_cache() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("manifest.csv"), "repo_url,sha,label,test_fold\n").unwrap();
    let s = cmd_ingest(&config(tmp.path())).unwrap();
    assert_eq!((s.included, s.excluded.len()), (0, 0));
    let text = std::fs::read_to_string(tmp.path().join("out/cache/exclusions.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_commitscan"));
    c.env_remove("COMMITSCAN_CLONE_ROOT").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn stage_order_and_validation_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["train", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("commitscan embed"), "{}", stderr(&o));

    let o = run(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("commitscan train"));

    let o = run(&["embed", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("commitscan ingest"));

    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "[ml]\nn_iters = 3\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "config"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n_iters"));

    assert_eq!(run(&["train", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--algorithms", "perceptron"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "seed = 3\n[ml]\nn_iter = 9\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "--seed", "11", "config"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let back: RunConfig = toml::from_str(&text).unwrap();
    assert_eq!((back.seed, back.ml.n_iter), (11, 9));

    let o = bin().env("COMMITSCAN_CLONE_ROOT", "/srv/clones").args(["config"]).output().unwrap();
    let back: RunConfig = toml::from_str(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(back.clone_root, PathBuf::from("/srv/clones"));
}

#[test]
fn rules_and_metrics_commands() {
    let o = run(&["rules", "list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert!(text.contains("CatchBroadException"));

    let tmp = tempfile::tempdir().unwrap();
    let f = tmp.path().join("A.java");
    std::fs::write(&f, "class A {\n  int x;\n  int get() { return x; }\n  void set(int v) { x = v; }\n}\n").unwrap();
    let o = run(&["metrics", "dump", f.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().clone();
    let row = r.records().next().unwrap().unwrap();
    let wmc = header.iter().position(|h| h == "wmc").unwrap();
    assert_eq!(&row[1], "A");
    assert_eq!(&row[wmc], "2");
}

fn pipeline(dir: &Path, seed: &str) -> Vec<u8> {
    let corpus = dir.join("corpus");
    let o = run(&["--seed", seed, "synth", "--n", "60", "--dest", corpus.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = corpus.join("commitscan.toml");
    let c = cfg.to_str().unwrap();
    for args in [
        vec!["-c", c, "ingest"],
        vec!["-c", c, "embed"],
        vec!["-c", c, "stats"],
        vec!["-c", c, "train", "--n-iter", "2"],
        vec!["-c", c, "evaluate"],
        vec!["-c", c, "report"],
    ] {
        let o = run(&args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    }
    std::fs::read(corpus.join("run/train/run_report.json")).unwrap()
}

#[test]
fn end_to_end_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = pipeline(a.path(), "7");
    let rb = pipeline(b.path(), "7");
    assert_eq!(ra, rb);

    let run_dir = a.path().join("corpus/run");
    for p in [
        "embeddings/graph.csv",
        "stats/summary.csv",
        "train/oof_scores.csv",
        "train/models/ensemble.json",
        "train/pr_curves/voting.csv",
        "evaluate/predictions.csv",
        "report/summary.md",
        "report/pr_curves/stacking.csv",
    ] {
        assert!(run_dir.join(p).exists(), "{p} missing");
    }
    let report: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report["embeddings"].as_object().unwrap().len(), 4);
    assert_eq!(report["voting"]["grid_size"], 15);
    assert_eq!(report["stacking"]["final_estimators"], 7);

    // A rerun over unchanged inputs leaves the stamped outputs alone.
    let stamp = std::fs::read(run_dir.join("train/.stamp")).unwrap();
    let c = a.path().join("corpus/commitscan.toml");
    let o = run(&["-c", c.to_str().unwrap(), "train", "--n-iter", "2"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(run_dir.join("train/.stamp")).unwrap(), stamp);
    assert_eq!(std::fs::read(run_dir.join("train/run_report.json")).unwrap(), ra);
}

#[test]
fn per_fold_pruning_carries_from_embed_to_train() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    assert!(run(&["synth", "--n", "40", "--dest", corpus.to_str().unwrap()]).status.success());
    let c = corpus.join("commitscan.toml");
    let c = c.to_str().unwrap();
    assert!(run(&["-c", c, "ingest"]).status.success());
    let o = run(&["-c", c, "--prune-per-fold", "embed"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run_dir = corpus.join("run");
    assert_eq!(std::fs::read_to_string(run_dir.join("embeddings/prune_mode")).unwrap(), "per_fold\n");
    let pruned = std::fs::read_to_string(run_dir.join("embeddings/pruned.csv")).unwrap();
    assert_eq!(pruned.lines().count(), 1);

    let o = run(&["-c", c, "train", "--n-iter", "1", "--algorithms", "logistic_regression,decision_tree"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(run_dir.join("train/run_report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["search"]["prune_per_fold"], true);
}
