//! Synthetic labeled corpora backed by real git history.
//!
//! Every commit edits one Java file. Negatives get one neutral edit. Positives
//! get the same neutral edit and, with probability `signal`, a planted change:
//! a null guard throwing `IllegalArgumentException`, or a broad
//! `catch (Exception e)` narrowed to `IOException`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_manifest, CommitRecord, CommitSnapshot, FilePair};
use crate::embedding::{commit_embedding, Analyzer, AnalyzerId};
use crate::error::{Error, Result};
use crate::lint::Thresholds;
use crate::pipeline::stratified_kfold;

pub const SYNTH_HOST: &str = "https://synth.invalid";

/// Probability that a positive commit carries a planted change.
pub fn parse_signal(s: &str) -> Result<f64> {
    let v = match s.trim().to_ascii_lowercase().as_str() {
        "high" => 0.9,
        "medium" => 0.5,
        "low" => 0.25,
        "none" | "off" => 0.0,
        other => other.parse::<f64>().map_err(|_| Error::Config(format!("signal {s:?} is not high, medium, low or a number")))?,
    };
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("signal {v} outside [0, 1]")));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub signal: f64,
    pub seed: u64,
    pub repos: usize,
    pub positive_fraction: f64,
    pub folds: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n: 200, signal: 0.9, seed: 42, repos: 4, positive_fraction: 0.5, folds: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edit {
    NullGuard,
    NarrowCatch,
    AddAccessor,
    RenameLocal,
    ResizeBuffer,
    AddStatement,
    AddComment,
}

impl Edit {
    pub const NEUTRAL: [Edit; 5] = [Edit::AddAccessor, Edit::RenameLocal, Edit::ResizeBuffer, Edit::AddStatement, Edit::AddComment];
    pub const PLANTED: [Edit; 2] = [Edit::NullGuard, Edit::NarrowCatch];
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Process { local: String, statements: Vec<String> },
    Load { buffer: u32, broad_catch: bool },
}

#[derive(Debug, Clone, PartialEq)]
struct Method {
    name: String,
    guarded: bool,
    comments: Vec<String>,
    body: Body,
}

#[derive(Debug, Clone, PartialEq)]
struct ClassFile {
    package: String,
    name: String,
    fields: Vec<String>,
    methods: Vec<Method>,
}

const LOCALS: [&str; 8] = ["total", "sum", "acc", "result", "value", "count", "tally", "size"];
const FIELDS: [&str; 8] = ["owner", "region", "label", "origin", "tag", "mode", "scope", "group"];

impl ClassFile {
    fn new(package: &str, name: &str, rng: &mut ChaCha8Rng) -> ClassFile {
        let mut methods = Vec::new();
        for i in 0..2 {
            methods.push(Method {
                name: format!("process{i}"),
                guarded: false,
                comments: Vec::new(),
                body: Body::Process { local: LOCALS[rng.random_range(0..LOCALS.len())].into(), statements: Vec::new() },
            });
            methods.push(Method {
                name: format!("load{i}"),
                guarded: false,
                comments: Vec::new(),
                body: Body::Load { buffer: 64, broad_catch: true },
            });
        }
        ClassFile { package: package.into(), name: name.into(), fields: Vec::new(), methods }
    }

    fn path(&self) -> String {
        format!("src/main/java/{}/{}.java", self.package.replace('.', "/"), self.name)
    }

    fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "package {};\n", self.package);
        s.push_str("import java.io.IOException;\nimport java.io.Reader;\n\n");
        let _ = writeln!(s, "public class {} {{", self.name);
        s.push_str("    private int calls;\n");
        for f in &self.fields {
            let _ = writeln!(s, "    private String {f};");
        }
        let _ = writeln!(s, "\n    public {}() {{\n        this.calls = 0;\n    }}", self.name);
        for m in &self.methods {
            s.push('\n');
            for c in &m.comments {
                let _ = writeln!(s, "    // {c}");
            }
            match &m.body {
                Body::Process { local, statements } => {
                    let _ = writeln!(s, "    public int {}(String input, int limit) {{", m.name);
                    if m.guarded {
                        s.push_str("        if (input == null) {\n            throw new IllegalArgumentException(\"input must not be null\");\n        }\n");
                    }
                    let _ = writeln!(s, "        int {local} = 0;");
                    let _ = writeln!(s, "        for (int i = 0; i < limit; i++) {{\n            {local} += input.length();\n        }}");
                    for st in statements {
                        let _ = writeln!(s, "        {}", st.replace("{v}", local));
                    }
                    let _ = writeln!(s, "        return {local};\n    }}");
                }
                Body::Load { buffer, broad_catch } => {
                    let _ = writeln!(s, "    public String {}(Reader reader) {{", m.name);
                    if m.guarded {
                        s.push_str("        if (reader == null) {\n            throw new IllegalArgumentException(\"reader must not be null\");\n        }\n");
                    }
                    let _ = writeln!(s, "        try {{\n            char[] buf = new char[{buffer}];\n            int n = reader.read(buf);");
                    s.push_str("            return new String(buf, 0, n);\n");
                    let _ = writeln!(s, "        }} catch ({} e) {{\n            return null;\n        }}\n    }}", if *broad_catch { "Exception" } else { "IOException" });
                }
            }
        }
        for f in &self.fields {
            let cap = format!("{}{}", f[..1].to_ascii_uppercase(), &f[1..]);
            let _ = writeln!(s, "\n    public String get{cap}() {{\n        return {f};\n    }}");
        }
        s.push_str("}\n");
        s
    }

    /// Applies `edit` if this file offers a place for it.
    fn apply(&mut self, edit: Edit, rng: &mut ChaCha8Rng) -> bool {
        let candidates: Vec<usize> = (0..self.methods.len())
            .filter(|&i| {
                let m = &self.methods[i];
                match edit {
                    Edit::NullGuard => !m.guarded,
                    Edit::NarrowCatch => matches!(m.body, Body::Load { broad_catch: true, .. }),
                    Edit::RenameLocal | Edit::AddStatement => matches!(m.body, Body::Process { .. }),
                    Edit::ResizeBuffer => matches!(m.body, Body::Load { .. }),
                    Edit::AddComment => m.comments.len() < 3,
                    Edit::AddAccessor => false,
                }
            })
            .collect();
        if edit == Edit::AddAccessor {
            let free: Vec<&str> = FIELDS.iter().copied().filter(|f| !self.fields.iter().any(|g| g == f)).collect();
            let Some(f) = free.choose(rng) else { return false };
            self.fields.push(f.to_string());
            return true;
        }
        let Some(&i) = candidates.choose(rng) else { return false };
        let m = &mut self.methods[i];
        match (edit, &mut m.body) {
            (Edit::NullGuard, _) => m.guarded = true,
            (Edit::NarrowCatch, Body::Load { broad_catch, .. }) => *broad_catch = false,
            (Edit::RenameLocal, Body::Process { local, .. }) => {
                let others: Vec<&str> = LOCALS.iter().copied().filter(|l| l != local).collect();
                *local = others.choose(rng).expect("several names").to_string();
            }
            (Edit::ResizeBuffer, Body::Load { buffer, .. }) => *buffer = if *buffer >= 4096 { 64 } else { *buffer * 2 },
            (Edit::AddStatement, Body::Process { statements, .. }) => {
                let forms = ["{v} = {v} + limit;", "{v} = {v} * 2;", "{v} = {v} - 1;", "this.calls = this.calls + 1;", "{v} = {v} % 7;"];
                statements.push(forms.choose(rng).expect("non-empty").to_string());
            }
            (Edit::AddComment, _) => {
                let words = [
                    "keeps totals in sync",
                    "reads the whole buffer",
                    "called from the scheduler",
                    "see issue tracker",
                    "the limit is checked by every caller before this runs, so the loop below never needs a separate bound on the number of passes it makes",
                ];
                m.comments.push(words.choose(rng).expect("non-empty").to_string());
            }
            _ => return false,
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCommit {
    pub record: CommitRecord,
    pub file: String,
    pub edits: Vec<Edit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub config: SynthConfig,
    pub positives: usize,
    pub planted_commits: usize,
    pub edit_counts: BTreeMap<String, usize>,
    /// Per analyzer: features a planted change moves and no neutral edit does.
    pub planted_features: BTreeMap<String, Vec<String>>,
    pub commits: Vec<SynthCommit>,
}

struct PendingCommit {
    repo: usize,
    label: u8,
    fold: u8,
}

fn fast_import(repo: &Path, stream: &[u8], marks: &Path) -> Result<()> {
    let mut child = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["fast-import", "--quiet", "--date-format=raw"])
        .arg(format!("--export-marks={}", marks.display()))
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Git { args: "fast-import".into(), message: e.to_string() })?;
    child.stdin.take().expect("piped").write_all(stream).map_err(|e| Error::io(repo, e))?;
    let out = child.wait_with_output().map_err(|e| Error::io(repo, e))?;
    if !out.status.success() {
        return Err(Error::Git { args: "fast-import".into(), message: String::from_utf8_lossy(&out.stderr).trim().to_string() });
    }
    Ok(())
}

fn git(dir: &Path, args: &[&str]) -> Result<()> {
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(args)
        .output()
        .map_err(|e| Error::Git { args: args.join(" "), message: e.to_string() })?;
    if !out.status.success() {
        return Err(Error::Git { args: args.join(" "), message: String::from_utf8_lossy(&out.stderr).trim().to_string() });
    }
    Ok(())
}

fn data(stream: &mut Vec<u8>, bytes: &[u8]) {
    stream.extend_from_slice(format!("data {}\n", bytes.len()).as_bytes());
    stream.extend_from_slice(bytes);
    stream.push(b'\n');
}

fn commit_header(stream: &mut Vec<u8>, mark: usize, time: u64, message: &str, from: Option<usize>) {
    stream.extend_from_slice(format!("commit refs/heads/main\nmark :{mark}\ncommitter Synth <synth@synth.invalid> {time} +0000\n").as_bytes());
    data(stream, message.as_bytes());
    if let Some(p) = from {
        stream.extend_from_slice(format!("from :{p}\n").as_bytes());
    }
}

fn inline_file(stream: &mut Vec<u8>, path: &str, text: &str) {
    stream.extend_from_slice(format!("M 100644 inline {path}\n").as_bytes());
    data(stream, text.as_bytes());
}

/// Writes `repos/proj-XXX` bare repositories plus `manifest.csv` and
/// `synth.json` under `out`. Returns the summary.
pub fn generate(cfg: &SynthConfig, out: &Path) -> Result<SynthSummary> {
    if cfg.n < 2 * cfg.folds || cfg.repos == 0 {
        return Err(Error::Config(format!("synth needs n ≥ {} and at least one repo", 2 * cfg.folds)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let positives = ((cfg.n as f64 * cfg.positive_fraction).round() as usize).clamp(cfg.folds, cfg.n - cfg.folds);
    let mut labels: Vec<u8> = (0..cfg.n).map(|i| u8::from(i < positives)).collect();
    labels.shuffle(&mut rng);
    let folds = stratified_kfold(&labels, cfg.folds, cfg.seed)?;
    let pending: Vec<PendingCommit> =
        (0..cfg.n).map(|i| PendingCommit { repo: i % cfg.repos, label: labels[i], fold: folds[i] }).collect();

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let out = &fs::canonicalize(out).map_err(|e| Error::io(out, e))?;
    let repo_root = out.join("repos");
    fs::create_dir_all(&repo_root).map_err(|e| Error::io(&repo_root, e))?;
    let mut records = Vec::new();
    let mut commits = Vec::new();
    let mut edit_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut planted_commits = 0;
    let base_time = 1_577_836_800u64;
    for r in 0..cfg.repos {
        let name = format!("proj-{r:03}");
        let dir = repo_root.join(&name);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        git(&dir, &["init", "-q", "--bare", "-b", "main"])?;
        let url = format!("{SYNTH_HOST}/{name}.git");

        let mine: Vec<&PendingCommit> = pending.iter().filter(|p| p.repo == r).collect();
        let n_files = (mine.len() / 4).max(8);
        let package = format!("org.synth.p{r}");
        let mut files: Vec<ClassFile> = (0..n_files).map(|i| ClassFile::new(&package, &format!("Service{i}"), &mut rng)).collect();
        let mut stream = Vec::new();
        commit_header(&mut stream, 1, base_time, "Initial import", None);
        for f in &files {
            inline_file(&mut stream, &f.path(), &f.render());
        }
        let mut plan = Vec::new();
        for (k, p) in mine.iter().enumerate() {
            let fi = rng.random_range(0..files.len());
            let mut edits = Vec::new();
            let neutral = *Edit::NEUTRAL.choose(&mut rng).expect("non-empty");
            if files[fi].apply(neutral, &mut rng) {
                edits.push(neutral);
            } else if files[fi].apply(Edit::AddComment, &mut rng) {
                edits.push(Edit::AddComment);
            }
            if p.label == 1 && rng.random_bool(cfg.signal) {
                let mut kinds = Edit::PLANTED;
                kinds.shuffle(&mut rng);
                if let Some(e) = kinds.into_iter().find(|e| files[fi].apply(*e, &mut rng)) {
                    edits.push(e);
                    planted_commits += 1;
                }
            }
            if edits.is_empty() {
                // Every slot used up: fall back to an accessor on another file.
                let alt = (0..files.len()).find(|&j| files[j].apply(Edit::AddAccessor, &mut rng));
                if alt.is_none() {
                    return Err(Error::Config("synthetic files ran out of edit slots; use more repos".into()));
                }
                edits.push(Edit::AddAccessor);
            }
            for e in &edits {
                *edit_counts.entry(format!("{e:?}")).or_default() += 1;
            }
            let mark = k + 2;
            let message = format!("Update {}", files[fi].name);
            commit_header(&mut stream, mark, base_time + 60 * (k as u64 + 1), &message, Some(mark - 1));
            inline_file(&mut stream, &files[fi].path(), &files[fi].render());
            plan.push((mark, p.label, p.fold, files[fi].path(), edits, message));
        }
        let marks = out.join(format!(".marks-{name}"));
        fast_import(&dir, &stream, &marks)?;
        let mark_text = fs::read_to_string(&marks).map_err(|e| Error::io(&marks, e))?;
        let shas: BTreeMap<usize, String> = mark_text
            .lines()
            .filter_map(|l| {
                let (m, sha) = l.split_once(' ')?;
                Some((m.trim_start_matches(':').parse().ok()?, sha.to_string()))
            })
            .collect();
        fs::remove_file(&marks).map_err(|e| Error::io(&marks, e))?;
        for (mark, label, fold, file, edits, message) in plan {
            let sha = shas.get(&mark).cloned().ok_or_else(|| Error::Git { args: "fast-import".into(), message: format!("mark :{mark} missing") })?;
            let record = CommitRecord { repo_url: url.clone(), sha, label, test_fold: fold, message: Some(message) };
            records.push(record.clone());
            commits.push(SynthCommit { record, file, edits });
        }
    }

    write_manifest(&out.join("manifest.csv"), &records)?;
    let summary = SynthSummary {
        config: cfg.clone(),
        positives,
        planted_commits,
        edit_counts,
        planted_features: planted_features()?,
        commits,
    };
    let path = out.join("synth.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

fn probe_embedding(analyzer: &Analyzer, before: &ClassFile, after: &ClassFile) -> Result<BTreeSet<String>> {
    let record = CommitRecord { repo_url: "probe".into(), sha: "0".repeat(40), label: 0, test_fold: 0, message: None };
    let files = FilePair::from_sides(before.path(), Some(before.render()), Some(after.render())).into_iter().collect();
    let v = commit_embedding(&CommitSnapshot { record, files }, analyzer)?;
    Ok(v.iter().filter(|(_, x)| *x != 0.0).map(|(n, _)| n.to_string()).collect())
}

/// Features moved by a planted edit on a probe file but by none of the
/// neutral edits, per analyzer.
pub fn planted_features() -> Result<BTreeMap<String, Vec<String>>> {
    let mut out = BTreeMap::new();
    for id in AnalyzerId::ALL {
        let analyzer = Analyzer::new(id, Thresholds::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let base = ClassFile::new("org.synth.probe", "Probe", &mut rng);
        let mut neutral = BTreeSet::new();
        for edit in Edit::NEUTRAL {
            for trial in 0..4u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(trial);
                let mut after = base.clone();
                if after.apply(edit, &mut rng) {
                    neutral.extend(probe_embedding(&analyzer, &base, &after)?);
                }
            }
        }
        let mut planted = BTreeSet::new();
        for edit in Edit::PLANTED {
            for trial in 0..4u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(trial);
                let mut after = base.clone();
                if after.apply(edit, &mut rng) {
                    planted.extend(probe_embedding(&analyzer, &base, &after)?);
                }
            }
        }
        out.insert(id.as_str().to_string(), planted.difference(&neutral).cloned().collect());
    }
    Ok(out)
}

pub fn default_out_dir() -> PathBuf {
    PathBuf::from("synth")
}
