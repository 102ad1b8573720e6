//! Directed graphs derived from syntax trees: one AST graph per file and one
//! statement-level control-flow graph per method body.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ast::{AstNode, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphKind {
    Ast,
    Cfg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeGraph {
    pub kind: GraphKind,
    pub node_labels: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl CodeGraph {
    pub fn new(kind: GraphKind) -> Self {
        CodeGraph { kind, node_labels: Vec::new(), edges: Vec::new() }
    }

    /// Builds a graph from explicit node count and edge list, with generic labels.
    pub fn from_edges(kind: GraphKind, node_count: usize, edges: &[(usize, usize)]) -> Self {
        CodeGraph { kind, node_labels: (0..node_count).map(|i| format!("n{i}")).collect(), edges: edges.to_vec() }
    }

    pub fn node_count(&self) -> usize {
        self.node_labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn add_node(&mut self, label: impl Into<String>) -> usize {
        self.node_labels.push(label.into());
        self.node_labels.len() - 1
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
        }
        adj
    }

    /// Adjacency lists of the undirected view (one entry per edge endpoint).
    pub fn undirected(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            if a != b {
                adj[b].push(a);
            }
        }
        adj
    }

    /// Nodes not reachable from node 0 along edge direction.
    pub fn unreachable_nodes(&self) -> Vec<usize> {
        if self.node_count() == 0 {
            return Vec::new();
        }
        let adj = self.successors();
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &m in &adj[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        (0..self.node_count()).filter(|&i| !seen[i]).collect()
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut s = format!("digraph {name} {{\n");
        for (i, l) in self.node_labels.iter().enumerate() {
            let _ = writeln!(s, "  {i} [label=\"{}\"];", l.replace('"', "\\\""));
        }
        for (a, b) in &self.edges {
            let _ = writeln!(s, "  {a} -> {b};");
        }
        s.push_str("}\n");
        s
    }
}

/// One node per syntax node (pre-order numbering), one edge per parent→child link.
pub fn ast_to_graph(root: &AstNode) -> CodeGraph {
    fn visit(n: &AstNode, g: &mut CodeGraph) -> usize {
        let id = g.add_node(n.kind.name());
        for c in &n.children {
            g.edges.push((id, g.node_count()));
            visit(c, g);
        }
        id
    }
    let mut g = CodeGraph::new(GraphKind::Ast);
    visit(root, &mut g);
    g
}

pub const ENTRY: usize = 0;
pub const EXIT: usize = 1;

/// Control-flow graph of one method: node 0 is ENTRY, node 1 is EXIT and
/// every other node is a statement. Expressions are not expanded.
///
/// A method without a body yields the ENTRY→EXIT graph.
pub fn build_cfg(method: &AstNode) -> CodeGraph {
    let mut b = CfgBuilder::default();
    b.graph.add_node("ENTRY");
    b.graph.add_node("EXIT");
    let exits = match method.body() {
        Some(body) => b.stmt(body, &[ENTRY]).exits,
        None => vec![ENTRY],
    };
    for e in exits {
        b.edge(e, EXIT);
    }
    b.graph
}

/// Every method (and constructor) of the file in source order.
pub fn methods(root: &AstNode) -> Vec<&AstNode> {
    root.walk().filter(|n| n.kind == NodeKind::MethodDecl).collect()
}

struct CfgBuilder {
    graph: CodeGraph,
    seen: HashSet<(usize, usize)>,
    jumps: Vec<JumpScope>,
}

impl Default for CfgBuilder {
    fn default() -> Self {
        CfgBuilder { graph: CodeGraph::new(GraphKind::Cfg), seen: HashSet::new(), jumps: Vec::new() }
    }
}

struct JumpScope {
    breaks: Vec<usize>,
    /// `None` for switch scopes, which only capture `break`.
    continue_target: Option<usize>,
}

struct Flow {
    entry: Option<usize>,
    exits: Vec<usize>,
}

impl CfgBuilder {
    fn edge(&mut self, a: usize, b: usize) {
        if self.seen.insert((a, b)) {
            self.graph.edges.push((a, b));
        }
    }

    fn enter(&mut self, label: &str, preds: &[usize]) -> usize {
        let n = self.graph.add_node(label);
        for &p in preds {
            self.edge(p, n);
        }
        n
    }

    fn seq(&mut self, stmts: &[AstNode], preds: &[usize]) -> Flow {
        let mut cur = preds.to_vec();
        let mut entry = None;
        for s in stmts {
            let f = self.stmt(s, &cur);
            if entry.is_none() {
                entry = f.entry;
            }
            cur = f.exits;
        }
        Flow { entry, exits: cur }
    }

    fn with_scope(&mut self, continue_target: Option<usize>, f: impl FnOnce(&mut Self) -> Vec<usize>) -> Vec<usize> {
        self.jumps.push(JumpScope { breaks: Vec::new(), continue_target });
        let mut exits = f(self);
        let scope = self.jumps.pop().expect("scope pushed above");
        exits.extend(scope.breaks);
        exits
    }

    fn stmt(&mut self, s: &AstNode, preds: &[usize]) -> Flow {
        let label = s.kind.name();
        match s.kind {
            NodeKind::Block => self.seq(&s.children, preds),
            NodeKind::If => {
                let n = self.enter(label, preds);
                let mut exits = self.stmt(&s.children[1], &[n]).exits;
                match s.children.get(2) {
                    Some(e) => exits.extend(self.stmt(e, &[n]).exits),
                    None => exits.push(n),
                }
                Flow { entry: Some(n), exits }
            }
            NodeKind::While | NodeKind::ForEach => {
                let n = self.enter(label, preds);
                let body = if s.kind == NodeKind::While { &s.children[1] } else { &s.children[2] };
                let exits = self.with_scope(Some(n), |b| {
                    let body_exits = b.stmt(body, &[n]).exits;
                    for e in body_exits {
                        b.edge(e, n);
                    }
                    vec![n]
                });
                Flow { entry: Some(n), exits }
            }
            NodeKind::DoWhile => {
                let cond = self.graph.add_node(label);
                let mut entry = None;
                let exits = self.with_scope(Some(cond), |b| {
                    let body = b.stmt(&s.children[0], preds);
                    for &e in &body.exits {
                        b.edge(e, cond);
                    }
                    match body.entry {
                        Some(first) => b.edge(cond, first),
                        None => {
                            // Empty body: the condition re-evaluates itself.
                            for &p in preds {
                                b.edge(p, cond);
                            }
                            b.edge(cond, cond);
                        }
                    }
                    entry = Some(body.entry.unwrap_or(cond));
                    vec![cond]
                });
                Flow { entry, exits }
            }
            NodeKind::For => {
                let (init, cond, update, body) = (&s.children[0], &s.children[1], &s.children[2], &s.children[3]);
                let mut entry = None;
                let mut cur = preds.to_vec();
                if !init.children.is_empty() {
                    let i = self.enter("ForInit", &cur);
                    entry = Some(i);
                    cur = vec![i];
                }
                let c = self.enter(label, &cur);
                entry.get_or_insert(c);
                let upd = if update.children.is_empty() { None } else { Some(self.graph.add_node("ForUpdate")) };
                if let Some(u) = upd {
                    self.edge(u, c);
                }
                let exits = self.with_scope(Some(upd.unwrap_or(c)), |b| {
                    let body_exits = b.stmt(body, &[c]).exits;
                    for e in body_exits {
                        b.edge(e, upd.unwrap_or(c));
                    }
                    // `for (;;)` only leaves through break.
                    if cond.children.is_empty() {
                        Vec::new()
                    } else {
                        vec![c]
                    }
                });
                Flow { entry, exits }
            }
            NodeKind::Switch => {
                let n = self.enter(label, preds);
                let has_default = s.children.iter().any(|c| c.kind == NodeKind::Default);
                let mut exits = self.with_scope(None, |b| {
                    let mut fall: Vec<usize> = Vec::new();
                    for case in &s.children[1..] {
                        let h = b.enter(case.kind.name(), &[n]);
                        for f in fall.drain(..) {
                            b.edge(f, h);
                        }
                        let stmts = if case.kind == NodeKind::Case { &case.children[1..] } else { &case.children[..] };
                        fall = b.seq(stmts, &[h]).exits;
                    }
                    fall
                });
                if !has_default {
                    exits.push(n);
                }
                Flow { entry: Some(n), exits }
            }
            NodeKind::Try => {
                let t = self.enter(label, preds);
                let mut rest = &s.children[..];
                let mut cur = vec![t];
                let first_inner = self.graph.node_count();
                if rest[0].kind == NodeKind::Resources {
                    cur = self.seq(&rest[0].children, &cur).exits;
                    rest = &rest[1..];
                }
                let try_exits = self.stmt(&rest[0], &cur).exits;
                let inner: Vec<usize> = (first_inner..self.graph.node_count()).collect();
                let mut exits = try_exits;
                let mut finally = None;
                for h in &rest[1..] {
                    match h.kind {
                        NodeKind::Catch => {
                            let c = self.graph.add_node(h.kind.name());
                            for &i in &inner {
                                self.edge(i, c);
                            }
                            exits.extend(self.stmt(&h.children[0], &[c]).exits);
                        }
                        _ => finally = Some(h),
                    }
                }
                if let Some(f) = finally {
                    let fnode = self.enter("Finally", &exits);
                    exits = self.stmt(&f.children[0], &[fnode]).exits;
                }
                Flow { entry: Some(t), exits }
            }
            NodeKind::Return | NodeKind::Throw => {
                let n = self.enter(label, preds);
                self.edge(n, EXIT);
                Flow { entry: Some(n), exits: Vec::new() }
            }
            NodeKind::Break => {
                let n = self.enter(label, preds);
                if let Some(scope) = self.jumps.last_mut() {
                    scope.breaks.push(n);
                }
                Flow { entry: Some(n), exits: Vec::new() }
            }
            NodeKind::Continue => {
                let n = self.enter(label, preds);
                if let Some(target) = self.jumps.iter().rev().find_map(|s| s.continue_target) {
                    self.edge(n, target);
                }
                Flow { entry: Some(n), exits: Vec::new() }
            }
            NodeKind::Synchronized => {
                let n = self.enter(label, preds);
                let exits = self.stmt(&s.children[1], &[n]).exits;
                Flow { entry: Some(n), exits }
            }
            _ => {
                let n = self.enter(label, preds);
                Flow { entry: Some(n), exits: vec![n] }
            }
        }
    }
}
