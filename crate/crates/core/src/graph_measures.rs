//! Network measures over AST and CFG graphs. A measure whose precondition
//! does not hold (no edges, disconnected graph, ...) is reported as 0.

use std::collections::{BTreeMap, VecDeque};

use crate::embedding::FeatureVector;
use crate::parser::{ast_to_graph, build_cfg, methods, parse_file, CodeGraph, GraphKind};

pub type GraphFeatureSet = BTreeMap<String, f64>;

pub const AST_MEASURES: [&str; 11] = [
    "node_count",
    "edge_count",
    "density",
    "mean_degree",
    "max_degree",
    "degree_variance",
    "leaf_fraction",
    "max_depth",
    "diameter",
    "mean_shortest_path",
    "degree_assortativity",
];

pub const CFG_MEASURES: [&str; 9] = [
    "node_count",
    "edge_count",
    "density",
    "mean_out_degree",
    "max_out_degree",
    "branch_node_count",
    "weakly_connected_components",
    "cyclomatic_number",
    "degree_assortativity",
];

/// CFG measures summed across the methods of a file; the rest are averaged.
const CFG_SUMMED: [&str; 5] = ["node_count", "edge_count", "branch_node_count", "weakly_connected_components", "cyclomatic_number"];

/// Undirected degree of each node; a self-loop adds 2.
fn degrees(g: &CodeGraph) -> Vec<usize> {
    let mut d = vec![0; g.node_count()];
    for &(a, b) in &g.edges {
        d[a] += 1;
        d[b] += 1;
    }
    d
}

/// Pearson correlation of endpoint degrees over edges taken in both
/// orientations. 0 without edges or when all endpoint degrees are equal.
pub fn degree_assortativity(g: &CodeGraph) -> f64 {
    if g.edges.is_empty() {
        return 0.0;
    }
    let d = degrees(g);
    let (mut sx, mut sxx, mut sxy) = (0.0, 0.0, 0.0);
    for &(a, b) in &g.edges {
        let (x, y) = (d[a] as f64, d[b] as f64);
        sx += x + y;
        sxx += x * x + y * y;
        sxy += 2.0 * x * y;
    }
    let n = 2.0 * g.edges.len() as f64;
    let mean = sx / n;
    let var = sxx / n - mean * mean;
    if var <= 1e-12 {
        return 0.0;
    }
    ((sxy / n - mean * mean) / var).clamp(-1.0, 1.0)
}

fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

/// Number of weakly connected components (0 for the empty graph).
pub fn weakly_connected_components(g: &CodeGraph) -> usize {
    let adj = g.undirected();
    let mut seen = vec![false; adj.len()];
    let mut count = 0;
    for s in 0..adj.len() {
        if seen[s] {
            continue;
        }
        count += 1;
        for (v, d) in bfs(&adj, s).into_iter().enumerate() {
            if d.is_some() {
                seen[v] = true;
            }
        }
    }
    count
}

/// Diameter and distance total over ordered pairs by BFS from every node.
fn all_pairs_distances(adj: &[Vec<usize>]) -> Option<(usize, usize)> {
    let mut diameter = 0;
    let mut total = 0usize;
    for s in 0..adj.len() {
        for d in bfs(adj, s) {
            let d = d?;
            diameter = diameter.max(d);
            total += d;
        }
    }
    Some((diameter, total))
}

/// Same result in linear time when the graph has n - 1 edges: connected
/// means it is a tree, where each edge lies on size * (n - size) paths and
/// the diameter is found by two sweeps.
fn tree_distances(adj: &[Vec<usize>]) -> Option<(usize, usize)> {
    let n = adj.len();
    let from_root = bfs(adj, 0);
    if from_root.iter().any(Option::is_none) {
        return None;
    }
    let far = (0..n).max_by_key(|&v| (from_root[v], std::cmp::Reverse(v)))?;
    let diameter = bfs(adj, far).into_iter().flatten().max()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(from_root[v]));
    let mut size = vec![1usize; n];
    let mut total = 0usize;
    for v in order {
        if v == 0 {
            continue;
        }
        let parent = adj[v].iter().copied().find(|&u| from_root[u].map(|d| d + 1) == from_root[v])?;
        size[parent] += size[v];
        total += size[v] * (n - size[v]);
    }
    Some((diameter, 2 * total))
}

/// Diameter and mean shortest path over unordered pairs of the undirected
/// view, or `None` if the graph is disconnected or has fewer than 2 nodes.
pub fn distance_measures(g: &CodeGraph) -> Option<(f64, f64)> {
    let n = g.node_count();
    if n < 2 {
        return None;
    }
    let adj = g.undirected();
    let (diameter, total) = if g.edge_count() == n - 1 { tree_distances(&adj)? } else { all_pairs_distances(&adj)? };
    let pairs = (n * (n - 1)) as f64;
    Some((diameter as f64, total as f64 / pairs))
}

fn ast_features(g: &CodeGraph) -> GraphFeatureSet {
    let n = g.node_count();
    let m = g.edge_count();
    let nf = n as f64;
    let deg = degrees(g);
    let mut out_deg = vec![0usize; n];
    for &(a, _) in &g.edges {
        out_deg[a] += 1;
    }
    let mean_degree = if n > 0 { 2.0 * m as f64 / nf } else { 0.0 };
    let variance = if n > 0 { deg.iter().map(|&d| (d as f64 - mean_degree).powi(2)).sum::<f64>() / nf } else { 0.0 };
    let depth = if n > 0 { bfs(&g.successors(), 0).into_iter().flatten().max().unwrap_or(0) } else { 0 };
    let (diameter, msp) = distance_measures(g).unwrap_or((0.0, 0.0));
    let mut f = GraphFeatureSet::new();
    f.insert("node_count".into(), nf);
    f.insert("edge_count".into(), m as f64);
    f.insert("density".into(), if n > 1 { 2.0 * m as f64 / (nf * (nf - 1.0)) } else { 0.0 });
    f.insert("mean_degree".into(), mean_degree);
    f.insert("max_degree".into(), deg.iter().copied().max().unwrap_or(0) as f64);
    f.insert("degree_variance".into(), variance);
    f.insert("leaf_fraction".into(), if m > 0 { out_deg.iter().filter(|&&d| d == 0).count() as f64 / nf } else { 0.0 });
    f.insert("max_depth".into(), depth as f64);
    f.insert("diameter".into(), diameter);
    f.insert("mean_shortest_path".into(), msp);
    f.insert("degree_assortativity".into(), degree_assortativity(g));
    f
}

fn cfg_features(g: &CodeGraph) -> GraphFeatureSet {
    let n = g.node_count();
    let m = g.edge_count();
    let nf = n as f64;
    let mut out_deg = vec![0usize; n];
    for &(a, _) in &g.edges {
        out_deg[a] += 1;
    }
    let components = weakly_connected_components(g);
    let mut f = GraphFeatureSet::new();
    f.insert("node_count".into(), nf);
    f.insert("edge_count".into(), m as f64);
    f.insert("density".into(), if n > 1 { m as f64 / (nf * (nf - 1.0)) } else { 0.0 });
    f.insert("mean_out_degree".into(), if n > 0 { m as f64 / nf } else { 0.0 });
    f.insert("max_out_degree".into(), out_deg.iter().copied().max().unwrap_or(0) as f64);
    f.insert("branch_node_count".into(), out_deg.iter().filter(|&&d| d >= 2).count() as f64);
    f.insert("weakly_connected_components".into(), components as f64);
    f.insert("cyclomatic_number".into(), if n > 0 { m as f64 - nf + 2.0 * components as f64 } else { 0.0 });
    f.insert("degree_assortativity".into(), degree_assortativity(g));
    f
}

/// The fixed measure set for the graph's kind.
pub fn graph_features(g: &CodeGraph) -> GraphFeatureSet {
    match g.kind {
        GraphKind::Ast => ast_features(g),
        GraphKind::Cfg => cfg_features(g),
    }
}

/// Feature names of the per-file vector, sorted.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = AST_MEASURES
        .iter()
        .map(|m| format!("ast_{m}"))
        .chain(CFG_MEASURES.iter().map(|m| format!("cfg_{m}")))
        .collect();
    names.push("parse_error".into());
    names.sort();
    names
}

/// AST measures as-is plus CFG measures aggregated over methods (counts
/// summed, everything else averaged).
pub fn file_graph_vector(ast: &CodeGraph, cfgs: &[CodeGraph]) -> FeatureVector {
    let mut map = BTreeMap::new();
    for (k, v) in graph_features(ast) {
        map.insert(format!("ast_{k}"), v);
    }
    let per_method: Vec<GraphFeatureSet> = cfgs.iter().map(graph_features).collect();
    for name in CFG_MEASURES {
        let total: f64 = per_method.iter().map(|f| f[name]).sum();
        let v = if CFG_SUMMED.contains(&name) || per_method.is_empty() { total } else { total / per_method.len() as f64 };
        map.insert(format!("cfg_{name}"), v);
    }
    map.insert("parse_error".into(), 0.0);
    FeatureVector::from_map(&map)
}

/// Parses `text` and returns its graph vector; zeros with `parse_error=1` on failure.
pub fn graph_vector(text: &str) -> FeatureVector {
    match parse_file(text) {
        Ok(ast) => {
            let cfgs: Vec<CodeGraph> = methods(&ast).into_iter().map(build_cfg).collect();
            file_graph_vector(&ast_to_graph(&ast), &cfgs)
        }
        Err(_) => {
            let mut v = FeatureVector::zeros(&feature_names());
            v.set("parse_error", 1.0);
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ast(n: usize, edges: &[(usize, usize)]) -> CodeGraph {
        CodeGraph::from_edges(GraphKind::Ast, n, edges)
    }

    fn cfg(n: usize, edges: &[(usize, usize)]) -> CodeGraph {
        CodeGraph::from_edges(GraphKind::Cfg, n, edges)
    }

    /// All-pairs distances by Floyd–Warshall on the undirected view.
    fn floyd(g: &CodeGraph) -> Vec<Vec<f64>> {
        let n = g.node_count();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(a, b) in &g.edges {
            d[a][b] = 1.0;
            d[b][a] = 1.0;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    /// Pearson correlation written out directly over the list of endpoint pairs.
    fn pearson_pairs(g: &CodeGraph) -> f64 {
        let deg = degrees(g);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &(a, b) in &g.edges {
            xs.extend([deg[a] as f64, deg[b] as f64]);
            ys.extend([deg[b] as f64, deg[a] as f64]);
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn single_node_ast_is_all_zero_but_count() {
        let f = graph_features(&ast(1, &[]));
        for (k, v) in &f {
            let expected = if k == "node_count" { 1.0 } else { 0.0 };
            assert_eq!(*v, expected, "{k}");
        }
        assert_eq!(f.len(), 11);
    }

    #[test]
    fn path_p4_distances_match_floyd_warshall() {
        let g = ast(4, &[(0, 1), (1, 2), (2, 3)]);
        let f = graph_features(&g);
        assert_eq!(f["diameter"], 3.0);
        assert_relative_eq!(f["mean_shortest_path"], 10.0 / 6.0, epsilon = 1e-12);
        let d = floyd(&g);
        let mut pairs = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                pairs.push(d[i][j]);
            }
        }
        assert_relative_eq!(f["mean_shortest_path"], pairs.iter().sum::<f64>() / pairs.len() as f64, epsilon = 1e-12);
        assert_eq!(f["diameter"], pairs.iter().cloned().fold(0.0, f64::max));
        assert_eq!(f["max_depth"], 3.0);
        assert_relative_eq!(f["degree_assortativity"], pearson_pairs(&g), epsilon = 1e-12);
        assert_relative_eq!(f["degree_assortativity"], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn star_s4_is_perfectly_disassortative() {
        let g = ast(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let f = graph_features(&g);
        assert_relative_eq!(f["degree_assortativity"], -1.0, epsilon = 1e-12);
        assert_relative_eq!(pearson_pairs(&g), -1.0, epsilon = 1e-12);
        assert_eq!(f["max_degree"], 4.0);
        assert_relative_eq!(f["leaf_fraction"], 0.8);
        assert_relative_eq!(f["mean_degree"], 8.0 / 5.0);
        // degrees 4,1,1,1,1 around mean 1.6
        assert_relative_eq!(f["degree_variance"], (2.4f64.powi(2) + 4.0 * 0.6f64.powi(2)) / 5.0, epsilon = 1e-12);
        assert_relative_eq!(f["density"], 8.0 / 20.0);
    }

    #[test]
    fn binary_tree_depth_and_tree_invariants() {
        let edges: Vec<(usize, usize)> = (1..15).map(|i| ((i - 1) / 2, i)).collect();
        let g = ast(15, &edges);
        let f = graph_features(&g);
        assert_eq!(f["max_depth"], 3.0);
        assert_eq!(f["diameter"], 6.0);
        assert_eq!(f["edge_count"], f["node_count"] - 1.0);
        assert!(f["diameter"] <= f["node_count"] - 1.0);
        let a = f["degree_assortativity"];
        assert!((-1.0..=1.0).contains(&a));
        assert_relative_eq!(a, pearson_pairs(&g), epsilon = 1e-12);
    }

    #[test]
    fn tree_shortcut_agrees_with_all_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for n in 2..60 {
            let edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
            let adj = ast(n, &edges).undirected();
            assert_eq!(tree_distances(&adj), all_pairs_distances(&adj), "n = {n}");
        }
        // n - 1 edges but a self-loop leaves it disconnected.
        let g = ast(3, &[(0, 1), (2, 2)]);
        assert_eq!(distance_measures(&g), None);
    }

    #[test]
    fn diamond_cfg() {
        // ENTRY, EXIT, cond, a, b, d
        let g = cfg(6, &[(0, 2), (2, 3), (2, 4), (3, 5), (4, 5), (5, 1)]);
        let f = graph_features(&g);
        assert_eq!(f["branch_node_count"], 1.0);
        assert_eq!(f["weakly_connected_components"], 1.0);
        assert_eq!(f["cyclomatic_number"], 2.0);
        assert_eq!(f["max_out_degree"], 2.0);
        assert_relative_eq!(f["density"], 6.0 / 30.0);
        assert_relative_eq!(f["mean_out_degree"], 1.0);
    }

    #[test]
    fn conditional_zeros() {
        // No edges: assortativity, leaf fraction, distances all 0.
        let f = graph_features(&ast(3, &[]));
        for k in ["degree_assortativity", "leaf_fraction", "diameter", "mean_shortest_path"] {
            assert_eq!(f[k], 0.0, "{k}");
        }
        // Disconnected graph: distance measures 0.
        let f = graph_features(&ast(4, &[(0, 1), (2, 3)]));
        assert_eq!(f["diameter"], 0.0);
        assert_eq!(f["mean_shortest_path"], 0.0);
        // Regular graph: zero degree variance, assortativity 0.
        let f = graph_features(&ast(2, &[(0, 1)]));
        assert_eq!(f["degree_assortativity"], 0.0);
        // Empty CFG: component count 0.
        let f = graph_features(&cfg(0, &[]));
        assert!(f.values().all(|&v| v == 0.0));
        let f = graph_features(&cfg(1, &[]));
        assert_eq!(f["degree_assortativity"], 0.0);
        assert_eq!(f["weakly_connected_components"], 1.0);
    }

    #[test]
    fn cfg_aggregation_over_methods() {
        let empty = file_graph_vector(&ast(1, &[]), &[]);
        assert_eq!(empty.get("cfg_node_count"), Some(0.0));
        assert_eq!(empty.get("cfg_density"), Some(0.0));

        let a = cfg(5, &[(0, 2), (2, 3), (3, 4), (4, 1)]);
        let b = cfg(7, &[(0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1)]);
        let v = file_graph_vector(&ast(1, &[]), &[a.clone(), b.clone()]);
        assert_eq!(v.get("cfg_node_count"), Some(12.0));
        let mean_density = (graph_features(&a)["density"] + graph_features(&b)["density"]) / 2.0;
        assert_relative_eq!(v.get("cfg_density").unwrap(), mean_density);
        assert_eq!(v.names().to_vec(), feature_names());
    }

    #[test]
    fn straight_line_cyclomatic_is_one() {
        let v = graph_vector("class A { void f() { a(); b(); c(); } }");
        assert_eq!(v.get("cfg_node_count"), Some(5.0));
        assert_eq!(v.get("cfg_edge_count"), Some(4.0));
        assert_eq!(v.get("cfg_cyclomatic_number"), Some(1.0));
    }

    #[test]
    fn cyclomatic_matches_decision_count_on_parsed_methods() {
        let root = parse_file("class A { void f(int x) { if (x > 0) { a(); } else { b(); } while (x < 3) { x++; } switch (x) { case 1: c(); break; case 2: d(); break; default: e(); } } }").unwrap();
        let g = build_cfg(methods(&root)[0]);
        let f = graph_features(&g);
        // if (1) + while (1) + switch with three arms (2) beyond the tree edges.
        assert_eq!(f["cyclomatic_number"], 5.0);
    }
}
