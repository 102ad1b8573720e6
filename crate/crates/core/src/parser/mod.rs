//! Java-subset front end: tokenizer, parser, source printer and the AST/CFG
//! graph builders consumed by the analyzers.

pub mod ast;
pub mod graph;
pub mod lexer;
mod parse;
pub mod print;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ast::{AstNode, LiteralKind, Modifiers, NodeKind, Span};
pub use graph::{ast_to_graph, build_cfg, methods, CodeGraph, GraphKind};
pub use parse::parse_file;
pub use print::to_source;

/// First syntax error of a file. Analyzers treat this as a value: the file's
/// features become zero and its `parse_error` flag is raised.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseFailure {}

/// Node kinds of a tree in pre-order with their depth, for structural comparison.
pub fn kind_outline(root: &AstNode) -> Vec<(usize, NodeKind)> {
    fn go(n: &AstNode, depth: usize, out: &mut Vec<(usize, NodeKind)>) {
        out.push((depth, n.kind));
        for c in &n.children {
            go(c, depth + 1, out);
        }
    }
    let mut out = Vec::new();
    go(root, 0, &mut out);
    out
}
