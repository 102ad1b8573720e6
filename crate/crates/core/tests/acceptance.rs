//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line per criterion and exits non-zero if any failed.
//!
//! `ACCEPTANCE_ONLY=1,4` restricts the run to the listed criteria.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use commitscan::corpus::{CommitRecord, CommitSnapshot, FilePair, FileStatus};
use commitscan::embedding::{commit_embedding, prune_columns, version_vectors, Analyzer, AnalyzerId, EmbeddingMatrix};
use commitscan::lint::Thresholds;
use commitscan::graph_measures::{file_graph_vector, graph_features, GraphFeatureSet};
use commitscan::learners::{
    fit, logistic_gradient, logistic_objective, svm_objective, svm_subgradient, Algorithm, Fitted, Hyper, Matrix, ModelSpec,
};
use commitscan::parser::{CodeGraph, GraphKind};
use commitscan::pipeline::{split, stratified_kfold, Candidate, FittedPipeline, RunReport, SearchConfig};
use commitscan::stats::{chi_square, chi_square_uncorrected, cramers_v, ContingencyTable};

const CHI2_TOL: f64 = 1e-9;
const CRAMER_TOL: f64 = 1e-12;
const P_TOL: f64 = 1e-8;
const CORRELATION_TOL: f64 = 1e-12;
const CONSERVATION_TOL: f64 = 1e-9;
const GRADIENT_REL_TOL: f64 = 1e-5;
const POSTERIOR_TOL: f64 = 1e-12;
const SIGNAL_PRECISION: f64 = 0.90;
const NULL_PRECISION: (f64, f64) = (0.40, 0.60);
const PLANTED_SIGNIFICANT: f64 = 0.80;
const MIN_RECALL: f64 = 0.3;
/// Search draws per (embedding, algorithm) in the end-to-end run.
const N_ITER: usize = 20;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

/// Chi-square upper tail for small integer dof from the closed forms of the
/// regularized upper incomplete gamma function Q(k/2, x/2).
fn reference_sf(x: f64, dof: usize) -> f64 {
    let h = x / 2.0;
    if dof % 2 == 0 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..dof / 2 {
            term *= h / k as f64;
            sum += term;
        }
        (-h).exp() * sum
    } else {
        // Q(1/2, h) = erfc(sqrt h); Q(a+1, h) = Q(a, h) + h^a e^-h / Γ(a+1).
        let mut q = libm::erfc(h.sqrt());
        let mut a = 0.5;
        let mut term = h.sqrt() * (-h).exp() / libm::tgamma(1.5);
        for _ in 0..(dof - 1) / 2 {
            q += term;
            term *= h / (a + 1.0);
            a += 1.0;
        }
        q
    }
}

fn criterion_statistics() -> Check {
    let t = ContingencyTable::new(vec![vec![10, 20], vec![20, 10]]).map_err(|e| e.to_string())?;
    let raw = chi_square_uncorrected(&t).map_err(|e| e.to_string())?;
    let yates = chi_square(&t).map_err(|e| e.to_string())?;
    ensure((raw.chi2 - 20.0 / 3.0).abs() <= CHI2_TOL, || format!("uncorrected chi2 {}", raw.chi2))?;
    ensure((yates.chi2 - 5.4).abs() <= CHI2_TOL, || format!("Yates chi2 {}", yates.chi2))?;
    let v = cramers_v(yates.chi2, t.total(), 2, 2);
    ensure((v - 0.3).abs() <= CRAMER_TOL, || format!("Cramér's V {v}"))?;

    let mut worst: f64 = 0.0;
    for (x, dof) in [(raw.chi2, 1), (yates.chi2, 1), (0.5, 1), (3.84, 1), (10.0, 2), (7.8, 3), (2.0, 4), (15.0, 5), (25.0, 6), (1.0, 7)] {
        let got = commitscan::stats::chi2_sf(x, dof);
        let want = reference_sf(x, dof);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= P_TOL, || format!("p({x}, {dof}) = {got}, reference {want}"))?;
    }
    ensure((raw.p_value - reference_sf(20.0 / 3.0, 1)).abs() <= P_TOL, || "p-value of the worked example".into())?;

    let t3 = ContingencyTable::new(vec![vec![12, 5], vec![7, 9], vec![3, 14]]).map_err(|e| e.to_string())?;
    let r3 = chi_square(&t3).map_err(|e| e.to_string())?;
    let e = t3.expected().map_err(|e| e.to_string())?;
    let mut by_hand = 0.0;
    for (orow, erow) in t3.counts.iter().zip(&e) {
        for (&o, &ex) in orow.iter().zip(erow) {
            by_hand += (o as f64 - ex).powi(2) / ex;
        }
    }
    ensure(r3.dof == 2 && (r3.chi2 - by_hand).abs() <= CHI2_TOL, || format!("3x2 chi2 {} vs {by_hand}", r3.chi2))?;
    ensure(ContingencyTable::new(vec![vec![0, 0], vec![3, 4]]).and_then(|t| chi_square(&t)).is_err(), || "empty margin accepted".into())?;
    Ok(format!("chi2 {:.4}/{:.4}, V {:.4}, max p error {worst:.1e}", raw.chi2, yates.chi2, v))
}

// ---------------------------------------------------------------- 2

fn graph(kind: GraphKind, n: usize, edges: &[(usize, usize)]) -> CodeGraph {
    CodeGraph::from_edges(kind, n, edges)
}

fn undirected(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

fn bfs_from(adj: &[Vec<usize>], s: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Every measure recomputed by enumeration. Assortativity is returned
/// separately since it is compared to a tolerance.
fn brute_force(kind: GraphKind, n: usize, edges: &[(usize, usize)]) -> (BTreeMap<&'static str, f64>, f64) {
    let m = edges.len();
    let adj = undirected(n, edges);
    let deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut out_deg = vec![0usize; n];
    for &(a, _) in edges {
        out_deg[a] += 1;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        edges.iter().flat_map(|&(a, b)| [(deg[a] as f64, deg[b] as f64), (deg[b] as f64, deg[a] as f64)]).unzip();
    let assort = if m == 0 { 0.0 } else { pearson(&xs, &ys) };
    let mut f = BTreeMap::new();
    f.insert("node_count", n as f64);
    f.insert("edge_count", m as f64);
    match kind {
        GraphKind::Ast => {
            let pairs: Vec<Option<usize>> = (0..n).flat_map(|i| {
                let d = bfs_from(&adj, i);
                (i + 1..n).map(move |j| d[j])
            }).collect();
            let connected = n >= 2 && pairs.iter().all(Option::is_some);
            let dists: Vec<usize> = pairs.iter().flatten().copied().collect();
            let mut directed = vec![Vec::new(); n];
            for &(a, b) in edges {
                directed[a].push(b);
            }
            let depth = if n > 0 { bfs_from(&directed, 0).into_iter().flatten().max().unwrap_or(0) } else { 0 };
            let mean_deg = if n > 0 { deg.iter().sum::<usize>() as f64 / n as f64 } else { 0.0 };
            f.insert("density", if n > 1 { m as f64 / (n * (n - 1) / 2) as f64 } else { 0.0 });
            f.insert("mean_degree", mean_deg);
            f.insert("max_degree", deg.iter().copied().max().unwrap_or(0) as f64);
            f.insert("degree_variance", if n > 0 { deg.iter().map(|&d| (d as f64 - mean_deg).powi(2)).sum::<f64>() / n as f64 } else { 0.0 });
            f.insert("leaf_fraction", if m > 0 { out_deg.iter().filter(|&&d| d == 0).count() as f64 / n as f64 } else { 0.0 });
            f.insert("max_depth", depth as f64);
            f.insert("diameter", if connected { *dists.iter().max().unwrap() as f64 } else { 0.0 });
            f.insert("mean_shortest_path", if connected { dists.iter().sum::<usize>() as f64 / dists.len() as f64 } else { 0.0 });
        }
        GraphKind::Cfg => {
            let mut seen = vec![false; n];
            let mut components = 0;
            for s in 0..n {
                if !seen[s] {
                    components += 1;
                    for (v, d) in bfs_from(&adj, s).into_iter().enumerate() {
                        if d.is_some() {
                            seen[v] = true;
                        }
                    }
                }
            }
            f.insert("density", if n > 1 { m as f64 / (n * (n - 1)) as f64 } else { 0.0 });
            f.insert("mean_out_degree", if n > 0 { m as f64 / n as f64 } else { 0.0 });
            f.insert("max_out_degree", out_deg.iter().copied().max().unwrap_or(0) as f64);
            f.insert("branch_node_count", out_deg.iter().filter(|&&d| d >= 2).count() as f64);
            f.insert("weakly_connected_components", components as f64);
            f.insert("cyclomatic_number", if n > 0 { m as f64 - n as f64 + 2.0 * components as f64 } else { 0.0 });
        }
    }
    (f, assort)
}

fn compare(name: &str, got: &GraphFeatureSet, kind: GraphKind, n: usize, edges: &[(usize, usize)]) -> Result<(), String> {
    let (want, assort) = brute_force(kind, n, edges);
    ensure(got.len() == want.len() + 1, || format!("{name}: {} measures", got.len()))?;
    for (k, v) in &want {
        ensure(got[*k] == *v, || format!("{name}: {k} = {}, enumeration gives {v}", got[*k]))?;
    }
    let a = got["degree_assortativity"];
    ensure((a - assort).abs() <= CORRELATION_TOL, || format!("{name}: assortativity {a} vs {assort}"))
}

fn criterion_graphs() -> Check {
    let p4 = [(0, 1), (1, 2), (2, 3)];
    let s4 = [(0, 1), (0, 2), (0, 3), (0, 4)];
    let tree: Vec<(usize, usize)> = (1..15).map(|i| ((i - 1) / 2, i)).collect();
    let diamond = [(0, 2), (2, 3), (2, 4), (3, 5), (4, 5), (5, 1)];
    let fixtures: [(&str, GraphKind, usize, &[(usize, usize)]); 4] = [
        ("P4", GraphKind::Ast, 4, &p4),
        ("S4", GraphKind::Ast, 5, &s4),
        ("binary tree", GraphKind::Ast, 15, &tree),
        ("diamond CFG", GraphKind::Cfg, 6, &diamond),
    ];
    for (name, kind, n, edges) in fixtures {
        compare(name, &graph_features(&graph(kind, n, edges)), kind, n, edges)?;
    }
    let p = graph_features(&graph(GraphKind::Ast, 4, &p4));
    ensure(p["diameter"] == 3.0 && p["mean_shortest_path"] == 10.0 / 6.0, || "P4 distances".into())?;
    ensure((graph_features(&graph(GraphKind::Ast, 5, &s4))["degree_assortativity"] + 1.0).abs() <= CORRELATION_TOL, || "S4 assortativity".into())?;
    ensure(graph_features(&graph(GraphKind::Ast, 15, &tree))["max_depth"] == 3.0, || "tree depth".into())?;
    ensure(graph_features(&graph(GraphKind::Cfg, 6, &diamond))["cyclomatic_number"] == 2.0, || "diamond cyclomatic number".into())?;

    // Each rule: (fixture, measures that must be exactly 0).
    let rules: [(&str, CodeGraph, &[&str]); 7] = [
        ("edgeless AST", graph(GraphKind::Ast, 3, &[]), &["degree_assortativity", "leaf_fraction", "diameter", "mean_shortest_path"]),
        ("disconnected AST", graph(GraphKind::Ast, 4, &[(0, 1), (2, 3)]), &["diameter", "mean_shortest_path"]),
        ("single-node AST", graph(GraphKind::Ast, 1, &[]), &["density", "diameter", "mean_shortest_path", "degree_assortativity", "mean_degree"]),
        ("regular AST", graph(GraphKind::Ast, 2, &[(0, 1)]), &["degree_assortativity", "degree_variance"]),
        ("edgeless CFG", graph(GraphKind::Cfg, 1, &[]), &["degree_assortativity", "density", "edge_count"]),
        (
            "empty CFG",
            graph(GraphKind::Cfg, 0, &[]),
            &["node_count", "weakly_connected_components", "cyclomatic_number", "mean_out_degree", "density"],
        ),
        ("regular CFG", graph(GraphKind::Cfg, 3, &[(0, 1), (1, 2), (2, 0)]), &["degree_assortativity", "branch_node_count"]),
    ];
    for (name, g, zero) in &rules {
        let f = graph_features(g);
        for k in *zero {
            ensure(f[*k] == 0.0, || format!("{name}: {k} = {}", f[*k]))?;
        }
    }
    let no_methods = file_graph_vector(&graph(GraphKind::Ast, 1, &[]), &[]);
    let cfg_values: Vec<f64> = no_methods.iter().filter(|(n, _)| n.starts_with("cfg_")).map(|(_, v)| v).collect();
    ensure(cfg_values.len() == 9 && cfg_values.iter().all(|&v| v == 0.0), || "file without methods has non-zero cfg_ measures".into())?;
    Ok(format!("4 fixtures match enumeration, {} conditional-zero rules fire", rules.len() + 1))
}

// ---------------------------------------------------------------- 3

const IDENTS: [&str; 10] = ["a", "b", "count", "total", "item", "node", "buf", "key", "limit", "flag"];

fn expr(rng: &mut ChaCha8Rng) -> String {
    let id = IDENTS[rng.random_range(0..IDENTS.len())];
    match rng.random_range(0..6) {
        0 => id.to_string(),
        1 => format!("{id} + {}", rng.random_range(0..100)),
        2 => format!("{id} * {}", IDENTS[rng.random_range(0..IDENTS.len())]),
        3 => format!("helper({id}, \"{}\")", ["x", "path", "id"][rng.random_range(0..3)]),
        4 => format!("{id} - 1"),
        _ => rng.random_range(0..1000).to_string(),
    }
}

fn cond(rng: &mut ChaCha8Rng) -> String {
    let op = ["<", ">", "==", "!=", "<=", ">="][rng.random_range(0..6)];
    format!("{} {op} {}", IDENTS[rng.random_range(0..IDENTS.len())], expr(rng))
}

fn block(rng: &mut ChaCha8Rng, depth: usize, indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    for _ in 0..rng.random_range(1..5) {
        let kind = if depth >= 3 { 0 } else { rng.random_range(0..8) };
        let id = IDENTS[rng.random_range(0..IDENTS.len())];
        match kind {
            0 | 1 => out.push_str(&format!("{pad}{id} = {};\n", expr(rng))),
            2 => {
                out.push_str(&format!("{pad}if ({}) {{\n", cond(rng)));
                block(rng, depth + 1, indent + 1, out);
                if rng.random_bool(0.5) {
                    out.push_str(&format!("{pad}}} else {{\n"));
                    block(rng, depth + 1, indent + 1, out);
                }
                out.push_str(&format!("{pad}}}\n"));
            }
            3 => {
                out.push_str(&format!("{pad}for (int i = 0; i < {id}; i++) {{\n"));
                block(rng, depth + 1, indent + 1, out);
                out.push_str(&format!("{pad}}}\n"));
            }
            4 => {
                out.push_str(&format!("{pad}while ({}) {{\n", cond(rng)));
                block(rng, depth + 1, indent + 1, out);
                out.push_str(&format!("{pad}}}\n"));
            }
            5 => {
                out.push_str(&format!("{pad}try {{\n"));
                block(rng, depth + 1, indent + 1, out);
                let ex = ["Exception", "IOException", "RuntimeException"][rng.random_range(0..3)];
                out.push_str(&format!("{pad}}} catch ({ex} e) {{\n"));
                block(rng, depth + 1, indent + 1, out);
                out.push_str(&format!("{pad}}}\n"));
            }
            6 => out.push_str(&format!("{pad}helper({}, \"{id}\");\n", expr(rng))),
            _ => out.push_str(&format!("{pad}int {id}{} = {};\n", rng.random_range(0..9), expr(rng))),
        }
    }
}

fn java_class(rng: &mut ChaCha8Rng, name: &str) -> String {
    let mut s = format!("package gen;\n\npublic class {name} {{\n");
    for f in 0..rng.random_range(0..4) {
        s.push_str(&format!("    private int f{f};\n"));
    }
    for m in 0..rng.random_range(0..5) {
        s.push_str(&format!("\n    public int m{m}(int a, int b) {{\n"));
        block(rng, 0, 2, &mut s);
        s.push_str("        return a;\n    }\n");
    }
    s.push_str("}\n");
    if rng.random_bool(0.03) {
        s.truncate(s.len() / 2);
    }
    s
}

fn random_commit(rng: &mut ChaCha8Rng, i: usize) -> CommitSnapshot {
    let record = CommitRecord { repo_url: "gen".into(), sha: format!("{i:040x}"), label: (i % 2) as u8, test_fold: (i % 5) as u8, message: None };
    let mut files = Vec::new();
    for k in 0..rng.random_range(1..4) {
        let name = format!("C{k}");
        let (pre, post) = match rng.random_range(0..5) {
            0 => (None, Some(java_class(rng, &name))),
            1 => (Some(java_class(rng, &name)), None),
            _ => (Some(java_class(rng, &name)), Some(java_class(rng, &name))),
        };
        files.extend(FilePair::from_sides(format!("src/{name}.java"), pre, post));
    }
    CommitSnapshot { record, files }
}

fn criterion_embedding() -> Check {
    let analyzers: Vec<Analyzer> = AnalyzerId::ALL.iter().map(|&id| Analyzer::new(id, Thresholds::default())).collect();
    let mut matrices: Vec<EmbeddingMatrix> = Vec::new();
    for a in &analyzers {
        let names: Vec<String> = commitscan::embedding::aggregated_names(&a.feature_names());
        matrices.push(EmbeddingMatrix::new(a.id.as_str(), names));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut worst: f64 = 0.0;
    let mut parse_errors = 0;
    for i in 0..1000 {
        let snap = random_commit(&mut rng, i);
        for (a, m) in analyzers.iter().zip(&mut matrices) {
            let e = commit_embedding(&snap, a).map_err(|e| e.to_string())?;
            let mut net: BTreeMap<String, f64> = BTreeMap::new();
            for p in &snap.files {
                let (pre, post) = version_vectors(p, a);
                for ((n, x), (_, y)) in pre.iter().zip(post.iter()) {
                    *net.entry(n.to_string()).or_default() += y - x;
                }
                parse_errors += usize::from(pre.get("parse_error") == Some(1.0) || post.get("parse_error") == Some(1.0));
            }
            for (n, d) in &net {
                let pos = e.get(&format!("{n}_pos")).ok_or_else(|| format!("{n}_pos missing"))?;
                let neg = e.get(&format!("{n}_neg")).ok_or_else(|| format!("{n}_neg missing"))?;
                ensure(pos >= 0.0 && neg >= 0.0, || format!("negative magnitude for {n}"))?;
                let err = (pos - neg - d).abs();
                worst = worst.max(err);
                ensure(err <= CONSERVATION_TOL, || format!("commit {i}, {}: {n} pos-neg {} vs net {d}", a.id.as_str(), pos - neg))?;
            }
            m.push(snap.record.commit_id(), snap.record.label, snap.record.test_fold, e.values().to_vec()).map_err(|e| e.to_string())?;

            let identity = CommitSnapshot {
                record: snap.record.clone(),
                files: snap
                    .files
                    .iter()
                    .map(|p| {
                        let t = p.pre_text.clone().or_else(|| p.post_text.clone());
                        FilePair { path: p.path.clone(), status: FileStatus::Modified, pre_text: t.clone(), post_text: t }
                    })
                    .collect(),
            };
            let z = commit_embedding(&identity, a).map_err(|e| e.to_string())?;
            ensure(z.values().iter().all(|&v| v == 0.0), || format!("identity commit {i} non-zero under {}", a.id.as_str()))?;
        }
    }
    let mut kept = Vec::new();
    for m in &matrices {
        let once = prune_columns(m);
        let twice = prune_columns(&once.matrix);
        ensure(twice.matrix == once.matrix && twice.constant.is_empty() && twice.duplicates.is_empty(), || format!("{}: pruning not idempotent", m.analyzer))?;
        kept.push(format!("{} {}/{}", m.analyzer, once.matrix.n_cols(), m.n_cols()));
    }
    ensure(parse_errors > 0, || "generator never produced a parse failure".into())?;
    Ok(format!("1000 commits, max conservation error {worst:.1e}, kept columns: {}", kept.join(", ")))
}

// ---------------------------------------------------------------- 4

fn random_data(seed: u64, n: usize, d: usize) -> (Matrix, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y = rows.iter().map(|r| u8::from(r[0] - 0.7 * r[2] + rng.random_range(-0.8..0.8) > 0.0)).collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

type Objective = fn(&Matrix, &[f64], &[f64], f64, f64) -> f64;
type Gradient = fn(&Matrix, &[f64], &[f64], f64, f64) -> (Vec<f64>, f64);

fn gradient_rel_error(obj: Objective, grad: Gradient, x: &Matrix, y: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
    let h = 1e-6;
    let (mut analytic, gb) = grad(x, y, w, b, l2);
    analytic.push(gb);
    let numeric: Vec<f64> = (0..=w.len())
        .map(|k| {
            let at = |delta: f64| {
                let mut w2 = w.to_vec();
                let mut b2 = b;
                if k < w.len() {
                    w2[k] += delta;
                } else {
                    b2 += delta;
                }
                obj(x, y, &w2, b2, l2)
            };
            (at(h) - at(-h)) / (2.0 * h)
        })
        .collect();
    let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    diff / analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8)
}

fn criterion_learners() -> Check {
    let (x, y) = random_data(40, 60, 5);
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut lr_worst, mut svm_worst) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let w: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b = rng.random_range(-1.0..1.0);
        let l2 = rng.random_range(1e-3..1.0);
        lr_worst = lr_worst.max(gradient_rel_error(logistic_objective, logistic_gradient, &x, &yf, &w, b, l2));
        svm_worst = svm_worst.max(gradient_rel_error(svm_objective, svm_subgradient, &x, &yf, &w, b, l2));
    }
    ensure(lr_worst < GRADIENT_REL_TOL, || format!("logistic gradient rel err {lr_worst:.2e}"))?;
    ensure(svm_worst < GRADIENT_REL_TOL, || format!("SVM gradient rel err {svm_worst:.2e}"))?;

    let gnb = fit(&ModelSpec::new(Hyper::GaussianNb { var_smoothing: 1e-9 }, 0), &x, &y).map_err(|e| e.to_string())?;
    let Fitted::GaussianNb(g) = &gnb.fitted else { return Err("not a GNB".into()) };
    let mut gnb_worst: f64 = 0.0;
    for _ in 0..1000 {
        let row: Vec<f64> = (0..5).map(|_| rng.random_range(-8.0..8.0)).collect();
        let (p0, p1) = g.posteriors(&row);
        gnb_worst = gnb_worst.max((p0 + p1 - 1.0).abs());
    }
    ensure(gnb_worst <= POSTERIOR_TOL, || format!("GNB posterior sum off by {gnb_worst:.1e}"))?;

    let rf = fit(&ModelSpec::new(Hyper::RandomForest { n_estimators: 25, max_depth: Some(6), min_leaf: 2 }, 3), &x, &y).map_err(|e| e.to_string())?;
    let Fitted::RandomForest(forest) = &rf.fitted else { return Err("not a forest".into()) };
    for _ in 0..1000 {
        let row: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let outs = forest.tree_outputs(&row);
        let mean = outs.iter().sum::<f64>() / outs.len() as f64;
        ensure(rf.predict_row(&row) == mean, || "forest probability differs from the tree mean".into())?;
    }

    let (probe, _) = random_data(41, 40, 5);
    let mut draw = ChaCha8Rng::seed_from_u64(5);
    for alg in Algorithm::ALL {
        for k in 0..3 {
            let spec = ModelSpec::new(Hyper::sample(alg, &mut draw), 100 + k);
            let a = fit(&spec, &x, &y).map_err(|e| e.to_string())?;
            let b = fit(&spec, &x, &y).map_err(|e| e.to_string())?;
            ensure(a.to_json().unwrap() == b.to_json().unwrap(), || format!("{alg}: two fits differ"))?;
            let bits = |m: &commitscan::learners::TrainedModel| m.predict_proba(&probe).unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            ensure(bits(&a) == bits(&b), || format!("{alg}: predictions differ"))?;
        }
    }
    Ok(format!(
        "gradient rel err LR {lr_worst:.1e} SVM {svm_worst:.1e}, GNB sum err {gnb_worst:.1e}, RF mean exact, {} algorithms deterministic",
        Algorithm::ALL.len()
    ))
}

// ---------------------------------------------------------------- 5

fn criterion_leakage() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let n = 80;
    let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let columns: Vec<Vec<f64>> = (0..14)
        .map(|j| {
            y.iter()
                .map(|&l| match j {
                    0 | 1 => l as f64 * 1.5 + rng.random_range(-1.0..1.0),
                    2 => 0.0,
                    _ => rng.random_range(0.0f64..4.0).floor(),
                })
                .collect()
        })
        .collect();
    let mut columns = columns;
    columns.push(columns[3].clone());
    let x = Matrix::from_columns(&columns).map_err(|e| e.to_string())?;
    let folds = stratified_kfold(&y, 5, 9).map_err(|e| e.to_string())?;
    let cfg = SearchConfig { n_iter: 1, seed: 1, ..SearchConfig::default() };
    let mut checked = 0;
    for (a, alg) in Algorithm::ALL.into_iter().enumerate() {
        for draw in 0..4u64 {
            let mut r = ChaCha8Rng::seed_from_u64(a as u64 * 31 + draw);
            let mut cand = Candidate::sample(alg, &cfg, &mut r, draw);
            cand.selection.prune = draw % 2 == 0;
            if let Some(p) = cand.selection.rfe.as_mut() {
                p.n_keep = p.n_keep.min(6);
            }
            for f in 0..5u8 {
                let (train, test) = split(&folds, f);
                let ytr: Vec<u8> = train.iter().map(|&i| y[i]).collect();
                let clean = FittedPipeline::fit(&cand, &x.select_rows(&train), &ytr);
                let mut poisoned = x.clone();
                let victim = test[(draw as usize) % test.len()];
                for j in 0..x.cols() {
                    poisoned.set(victim, j, 1e6);
                }
                let dirty = FittedPipeline::fit(&cand, &poisoned.select_rows(&train), &ytr);
                match (clean, dirty) {
                    (Ok(c), Ok(d)) => ensure(
                        c.preprocess == d.preprocess && c.model.to_json().unwrap() == d.model.to_json().unwrap(),
                        || format!("{alg} fold {f}: training statistics moved"),
                    )?,
                    (Err(c), Err(d)) => ensure(c.to_string() == d.to_string(), || "error changed".into())?,
                    _ => return Err(format!("{alg} fold {f}: outcome changed")),
                }
                checked += 1;
            }
        }
    }

    let mut m = EmbeddingMatrix::new("t", (0..columns.len()).map(|j| format!("f{j:02}")).collect());
    for i in 0..n {
        m.push(format!("r@{i:040}"), y[i], folds[i], columns.iter().map(|c| c[i]).collect()).map_err(|e| e.to_string())?;
    }
    for f in 0..5u8 {
        let (train, test) = split(&folds, f);
        let before = commitscan::embedding::prune_plan(&m, &train);
        let mut poisoned = m.clone();
        for &i in &test {
            poisoned.rows[i] = vec![1e6; columns.len()];
        }
        ensure(commitscan::embedding::prune_plan(&poisoned, &train) == before, || format!("fold {f}: prune mask moved"))?;
    }
    Ok(format!("{checked} fold fits and 5 prune masks unchanged by a 1e6 test-fold outlier"))
}

// ---------------------------------------------------------------- 6 and 7

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_commitscan"));
    c.env_remove("COMMITSCAN_CLONE_ROOT").env("RUST_LOG", "warn");
    c
}

fn cli(args: &[&str]) -> Result<(), String> {
    let o = bin().args(args).output().map_err(|e| e.to_string())?;
    ensure(o.status.success(), || format!("commitscan {}: {}", args.join(" "), String::from_utf8_lossy(&o.stderr)))
}

struct EndToEnd {
    report: RunReport,
    /// (significant, total) over the planted features.
    planted: (usize, usize),
    missed: Vec<String>,
}

/// synth, ingest, embed, stats and nested training on a fresh corpus.
fn end_to_end(dir: &Path, signal: &str) -> Result<EndToEnd, String> {
    let corpus = dir.join(format!("signal-{signal}"));
    let c = corpus.to_str().unwrap();
    cli(&["--seed", "42", "synth", "--n", "200", "--signal", signal, "--dest", c])?;
    let cfg = corpus.join("commitscan.toml");
    let cfg = cfg.to_str().unwrap();
    cli(&["-c", cfg, "ingest"])?;
    cli(&["-c", cfg, "embed"])?;
    cli(&["-c", cfg, "stats"])?;
    let n_iter = N_ITER.to_string();
    let min_recall = MIN_RECALL.to_string();
    cli(&["-c", cfg, "train", "--n-iter", &n_iter, "--min-recall", &min_recall, "--nested"])?;

    let run = corpus.join("run");
    let report: RunReport =
        serde_json::from_slice(&std::fs::read(run.join("train/run_report.json")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;

    let mut kept_as: BTreeMap<(String, String), Option<String>> = BTreeMap::new();
    let mut r = csv::Reader::from_path(run.join("embeddings/pruned.csv")).map_err(|e| e.to_string())?;
    for row in r.records() {
        let row = row.map_err(|e| e.to_string())?;
        let target = (!row[3].is_empty()).then(|| row[3].to_string());
        kept_as.insert((row[0].to_string(), row[1].to_string()), target);
    }
    let planted = commitscan::synth::planted_features().map_err(|e| e.to_string())?;
    let (mut hits, mut total, mut missed) = (0, 0, Vec::new());
    for (analyzer, features) in &planted {
        let mut significant = BTreeSet::new();
        let mut r = csv::Reader::from_path(run.join(format!("stats/{analyzer}.csv"))).map_err(|e| e.to_string())?;
        for row in r.records() {
            let row = row.map_err(|e| e.to_string())?;
            if &row[4] == "true" {
                significant.insert(row[0].to_string());
            }
        }
        for f in features {
            total += 1;
            let column = match kept_as.get(&(analyzer.clone(), f.clone())) {
                Some(Some(k)) => Some(k.clone()),
                Some(None) => None,
                None => Some(f.clone()),
            };
            if column.is_some_and(|c| significant.contains(&c)) {
                hits += 1;
            } else {
                missed.push(format!("{analyzer}/{f}"));
            }
        }
    }
    Ok(EndToEnd { report, planted: (hits, total), missed })
}

struct Shared {
    high: Option<Result<EndToEnd, String>>,
}

fn criterion_planted(shared: &mut Shared, dir: &Path) -> Check {
    let high = end_to_end(dir, "high");
    let null = end_to_end(dir, "0")?;
    let high = shared.high.insert(high).as_ref().map_err(Clone::clone)?;

    let nested = |e: &EndToEnd| e.report.nested.as_ref().map(|n| n.voting.mean.precision).ok_or("nested evaluation missing".to_string());
    let (high_nested, null_nested) = (nested(high)?, nested(&null)?);
    let high_cv = high.report.voting.cv.mean.precision;
    let null_cv = null.report.voting.cv.mean.precision;
    let (hits, total) = high.planted;
    let share = hits as f64 / total.max(1) as f64;
    let detail = format!(
        "high: nested voting precision {high_nested:.3}, CV {high_cv:.3}; planted significant {hits}/{total}; null: nested {null_nested:.3} (CV {null_cv:.3})"
    );
    ensure(total > 0, || "no planted features".into())?;
    ensure(high_nested >= SIGNAL_PRECISION && high_cv >= SIGNAL_PRECISION, || format!("{detail}: high-signal precision below {SIGNAL_PRECISION}"))?;
    ensure(share >= PLANTED_SIGNIFICANT, || format!("{detail}: missed {:?}", high.missed))?;
    ensure(
        (NULL_PRECISION.0..=NULL_PRECISION.1).contains(&null_nested),
        || format!("{detail}: null precision outside [{}, {}]", NULL_PRECISION.0, NULL_PRECISION.1),
    )?;
    Ok(detail)
}

fn criterion_structure(shared: &mut Shared, dir: &Path) -> Check {
    if shared.high.is_none() {
        shared.high = Some(end_to_end(dir, "high"));
    }
    let e = shared.high.as_ref().unwrap().as_ref().map_err(Clone::clone)?;
    let r = &e.report;
    ensure(r.embeddings.len() == 4, || format!("{} per-embedding models", r.embeddings.len()))?;
    let names: Vec<&str> = r.embeddings.keys().map(String::as_str).collect();
    ensure(names == ["graph", "lint_strict", "lint_style", "metrics"], || format!("embeddings {names:?}"))?;
    ensure(r.voting.grid_size == 15 && r.voting.grid.len() == 15, || format!("voting grid {}", r.voting.grid.len()))?;
    let finals: BTreeSet<Algorithm> = r.stacking.grid.iter().map(|s| s.final_estimator.algorithm()).collect();
    ensure(r.stacking.final_estimators == 7 && finals.len() == 7, || format!("stacking final estimators {}", finals.len()))?;
    Ok(format!("4 per-embedding best models, voting grid 15, stacking grid {} specs over 7 final estimators", r.stacking.grid.len()))
}

// ----------------------------------------------------------------

fn main() {
    let only: Option<BTreeSet<usize>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|p| p.trim().parse().ok()).collect());
    let dir = tempfile::tempdir().expect("temp dir");
    let mut shared = Shared { high: None };
    let budgets = [1, 1, 30, 60, 60, 600, 600].map(Duration::from_secs);
    let names = [
        "statistics oracle",
        "graph-measure oracle",
        "embedding invariants",
        "learner checks",
        "leakage guard",
        "planted signal end-to-end",
        "run report structure",
    ];
    let mut failed = 0;
    for (i, name) in names.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let result = match n {
            1 => criterion_statistics(),
            2 => criterion_graphs(),
            3 => criterion_embedding(),
            4 => criterion_learners(),
            5 => criterion_leakage(),
            6 => criterion_planted(&mut shared, dir.path()),
            _ => criterion_structure(&mut shared, dir.path()),
        };
        let took = start.elapsed();
        let result = result.and_then(|d| {
            // Criterion 7 reuses the criterion 6 run and only counts.
            if n != 7 && took > budgets[i] {
                Err(format!("{d}; took {took:.1?}, budget {:?}", budgets[i]))
            } else {
                Ok(d)
            }
        });
        match result {
            Ok(d) => println!("PASS criterion {n} ({name}) in {took:.2?}: {d}"),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}) in {took:.2?}: {e}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
