use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    CompilationUnit,
    ClassDecl,
    /// An interface name listed after `implements` (or `extends` on an interface).
    TypeRef,
    MethodDecl,
    Parameter,
    FieldDecl,
    VarDeclarator,
    Block,
    If,
    While,
    For,
    ForInit,
    ForCond,
    ForUpdate,
    ForEach,
    DoWhile,
    Switch,
    Case,
    Default,
    Try,
    Resources,
    Catch,
    Finally,
    Return,
    Break,
    Continue,
    Throw,
    Synchronized,
    Assert,
    Empty,
    ExprStatement,
    LocalVarDecl,
    Call,
    Arguments,
    FieldAccess,
    ArrayAccess,
    Identifier,
    Literal,
    ClassLiteral,
    BinaryOp,
    UnaryOp,
    Assign,
    Conditional,
    InstanceOf,
    Cast,
    New,
    NewArray,
    ArrayInit,
    Lambda,
    MethodRef,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::CompilationUnit => "CompilationUnit",
            NodeKind::ClassDecl => "ClassDecl",
            NodeKind::TypeRef => "TypeRef",
            NodeKind::MethodDecl => "MethodDecl",
            NodeKind::Parameter => "Parameter",
            NodeKind::FieldDecl => "FieldDecl",
            NodeKind::VarDeclarator => "VarDeclarator",
            NodeKind::Block => "Block",
            NodeKind::If => "If",
            NodeKind::While => "While",
            NodeKind::For => "For",
            NodeKind::ForInit => "ForInit",
            NodeKind::ForCond => "ForCond",
            NodeKind::ForUpdate => "ForUpdate",
            NodeKind::ForEach => "ForEach",
            NodeKind::DoWhile => "DoWhile",
            NodeKind::Switch => "Switch",
            NodeKind::Case => "Case",
            NodeKind::Default => "Default",
            NodeKind::Try => "Try",
            NodeKind::Resources => "Resources",
            NodeKind::Catch => "Catch",
            NodeKind::Finally => "Finally",
            NodeKind::Return => "Return",
            NodeKind::Break => "Break",
            NodeKind::Continue => "Continue",
            NodeKind::Throw => "Throw",
            NodeKind::Synchronized => "Synchronized",
            NodeKind::Assert => "Assert",
            NodeKind::Empty => "Empty",
            NodeKind::ExprStatement => "ExprStatement",
            NodeKind::LocalVarDecl => "LocalVarDecl",
            NodeKind::Call => "Call",
            NodeKind::Arguments => "Arguments",
            NodeKind::FieldAccess => "FieldAccess",
            NodeKind::ArrayAccess => "ArrayAccess",
            NodeKind::Identifier => "Identifier",
            NodeKind::Literal => "Literal",
            NodeKind::ClassLiteral => "ClassLiteral",
            NodeKind::BinaryOp => "BinaryOp",
            NodeKind::UnaryOp => "UnaryOp",
            NodeKind::Assign => "Assign",
            NodeKind::Conditional => "Conditional",
            NodeKind::InstanceOf => "InstanceOf",
            NodeKind::Cast => "Cast",
            NodeKind::New => "New",
            NodeKind::NewArray => "NewArray",
            NodeKind::ArrayInit => "ArrayInit",
            NodeKind::Lambda => "Lambda",
            NodeKind::MethodRef => "MethodRef",
        }
    }

    /// Statement kinds, i.e. the nodes that become CFG vertices.
    pub fn is_statement(self) -> bool {
        matches!(
            self,
            NodeKind::Block
                | NodeKind::If
                | NodeKind::While
                | NodeKind::For
                | NodeKind::ForEach
                | NodeKind::DoWhile
                | NodeKind::Switch
                | NodeKind::Try
                | NodeKind::Return
                | NodeKind::Break
                | NodeKind::Continue
                | NodeKind::Throw
                | NodeKind::Synchronized
                | NodeKind::Assert
                | NodeKind::Empty
                | NodeKind::ExprStatement
                | NodeKind::LocalVarDecl
        )
    }

    pub fn is_loop(self) -> bool {
        matches!(self, NodeKind::While | NodeKind::For | NodeKind::ForEach | NodeKind::DoWhile)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Modifiers(u16);

impl Modifiers {
    pub const PUBLIC: Modifiers = Modifiers(1);
    pub const PRIVATE: Modifiers = Modifiers(1 << 1);
    pub const PROTECTED: Modifiers = Modifiers(1 << 2);
    pub const STATIC: Modifiers = Modifiers(1 << 3);
    pub const FINAL: Modifiers = Modifiers(1 << 4);
    pub const ABSTRACT: Modifiers = Modifiers(1 << 5);
    pub const SYNCHRONIZED: Modifiers = Modifiers(1 << 6);
    pub const OTHER: Modifiers = Modifiers(1 << 7);
    /// Class declared with `interface`.
    pub const INTERFACE: Modifiers = Modifiers(1 << 8);
    /// Anonymous class body of a `new` expression.
    pub const ANONYMOUS: Modifiers = Modifiers(1 << 9);
    /// Method node that is a constructor.
    pub const CONSTRUCTOR: Modifiers = Modifiers(1 << 10);
    /// Unary operator written after its operand.
    pub const POSTFIX: Modifiers = Modifiers(1 << 11);
    pub const DEFAULT: Modifiers = Modifiers(1 << 12);

    pub const fn empty() -> Self {
        Modifiers(0)
    }

    pub fn contains(self, other: Modifiers) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn insert(&mut self, other: Modifiers) {
        self.0 |= other.0;
    }

    pub fn from_keyword(word: &str) -> Option<Modifiers> {
        Some(match word {
            "public" => Self::PUBLIC,
            "private" => Self::PRIVATE,
            "protected" => Self::PROTECTED,
            "static" => Self::STATIC,
            "final" => Self::FINAL,
            "abstract" => Self::ABSTRACT,
            "synchronized" => Self::SYNCHRONIZED,
            "default" => Self::DEFAULT,
            "native" | "transient" | "volatile" | "strictfp" => Self::OTHER,
            _ => return None,
        })
    }

    /// Source keywords in canonical order (structural flags omitted).
    pub fn keywords(self) -> Vec<&'static str> {
        let table = [
            (Self::PUBLIC, "public"),
            (Self::PROTECTED, "protected"),
            (Self::PRIVATE, "private"),
            (Self::ABSTRACT, "abstract"),
            (Self::STATIC, "static"),
            (Self::FINAL, "final"),
            (Self::SYNCHRONIZED, "synchronized"),
            (Self::DEFAULT, "default"),
        ];
        table.iter().filter(|(m, _)| self.contains(*m)).map(|(_, k)| *k).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start_line: u32,
    pub end_line: u32,
}

impl Span {
    pub fn new(start_line: u32, end_line: u32) -> Self {
        Span { start_line, end_line }
    }

    pub fn lines(&self) -> u32 {
        self.end_line.saturating_sub(self.start_line) + 1
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start_line <= other.start_line && other.end_line <= self.end_line
    }
}

/// Literal categories, recovered from the token text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiteralKind {
    String,
    Char,
    Number,
    Boolean,
    Null,
}

/// A syntax tree node.
///
/// `text` carries the name for declarations, identifiers and calls, the token
/// for literals, and the operator for operator nodes. `type_name` is the raw
/// (generics-erased) declared or referenced type where one exists: the
/// superclass of a class, the declared type of fields, locals and parameters,
/// the return type of a method, the created type of `new`, the caught types of
/// a catch clause (joined with `|`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: NodeKind,
    pub children: Vec<AstNode>,
    pub span: Span,
    pub text: Option<String>,
    pub type_name: Option<String>,
    pub modifiers: Modifiers,
}

impl AstNode {
    pub fn new(kind: NodeKind, span: Span) -> Self {
        AstNode { kind, children: Vec::new(), span, text: None, type_name: None, modifiers: Modifiers::empty() }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn with_type(mut self, type_name: impl Into<String>) -> Self {
        self.type_name = Some(type_name.into());
        self
    }

    pub fn with_children(mut self, children: Vec<AstNode>) -> Self {
        self.children = children;
        self
    }

    pub fn text(&self) -> &str {
        self.text.as_deref().unwrap_or("")
    }

    /// Number of nodes in this subtree, including `self`.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(AstNode::size).sum::<usize>()
    }

    /// Pre-order traversal over the subtree.
    pub fn walk(&self) -> Walk<'_> {
        Walk { stack: vec![self] }
    }

    pub fn literal_kind(&self) -> Option<LiteralKind> {
        if self.kind != NodeKind::Literal {
            return None;
        }
        let t = self.text();
        Some(match t.chars().next() {
            Some('"') => LiteralKind::String,
            Some('\'') => LiteralKind::Char,
            _ if t == "true" || t == "false" => LiteralKind::Boolean,
            _ if t == "null" => LiteralKind::Null,
            _ => LiteralKind::Number,
        })
    }

    /// Block body of a method or constructor, if it has one.
    pub fn body(&self) -> Option<&AstNode> {
        match self.kind {
            NodeKind::MethodDecl => self.children.iter().find(|c| c.kind == NodeKind::Block),
            _ => None,
        }
    }

    pub fn parameters(&self) -> impl Iterator<Item = &AstNode> {
        self.children.iter().filter(|c| c.kind == NodeKind::Parameter)
    }

    pub fn is_empty_block(&self) -> bool {
        (self.kind == NodeKind::Block && self.children.is_empty()) || self.kind == NodeKind::Empty
    }

    /// Direct class members, descending into nothing.
    pub fn members(&self) -> impl Iterator<Item = &AstNode> {
        self.children.iter().filter(|c| c.kind != NodeKind::TypeRef)
    }

    /// Every class declaration in the subtree, nested and anonymous ones included.
    pub fn classes(&self) -> Vec<&AstNode> {
        self.walk().filter(|n| n.kind == NodeKind::ClassDecl).collect()
    }
}

pub struct Walk<'a> {
    stack: Vec<&'a AstNode>,
}

impl<'a> Iterator for Walk<'a> {
    type Item = &'a AstNode;

    fn next(&mut self) -> Option<&'a AstNode> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

/// Visits the subtree without entering nested class declarations (the root
/// itself is always visited). Used by per-class analyses so inner and
/// anonymous classes are attributed to their own rows.
pub fn walk_own<'a>(root: &'a AstNode, f: &mut impl FnMut(&'a AstNode)) {
    f(root);
    for c in &root.children {
        if c.kind != NodeKind::ClassDecl {
            walk_own(c, f);
        }
    }
}

fn is_control(kind: NodeKind) -> bool {
    matches!(
        kind,
        NodeKind::If
            | NodeKind::While
            | NodeKind::For
            | NodeKind::ForEach
            | NodeKind::DoWhile
            | NodeKind::Switch
            | NodeKind::Try
            | NodeKind::Synchronized
    )
}

/// Control statements of the subtree (nested classes excluded) with their
/// nesting depth, 1 for an outermost one. An `if` in the `else` position of
/// another `if` keeps its parent's depth, so `else if` chains stay flat.
pub fn control_depths(root: &AstNode) -> Vec<(&AstNode, u32)> {
    fn go<'a>(n: &'a AstNode, depth: u32, else_if: bool, out: &mut Vec<(&'a AstNode, u32)>) {
        let mut inner = depth;
        if is_control(n.kind) {
            inner = if else_if { depth } else { depth + 1 };
            out.push((n, inner));
        }
        for (i, c) in n.children.iter().enumerate() {
            if c.kind == NodeKind::ClassDecl {
                continue;
            }
            let chained = n.kind == NodeKind::If && i == 2 && c.kind == NodeKind::If;
            go(c, inner, chained, out);
        }
    }
    let mut out = Vec::new();
    go(root, 0, false, &mut out);
    out
}
