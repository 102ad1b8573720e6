//! Class-level object-oriented metrics (CK-style), computed syntactically.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::embedding::FeatureVector;
use crate::parser::ast::{control_depths, walk_own};
use crate::parser::{parse_file, AstNode, LiteralKind, Modifiers, NodeKind};

pub const METRIC_NAMES: [&str; 18] = [
    "wmc",
    "dit",
    "cbo",
    "rfc",
    "lcom",
    "loc",
    "method_count",
    "field_count",
    "static_method_count",
    "return_count",
    "loop_count",
    "comparison_count",
    "try_count",
    "string_literal_count",
    "number_literal_count",
    "math_op_count",
    "variable_count",
    "max_nesting",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassType {
    Class,
    Interface,
    Anonymous,
}

impl ClassType {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassType::Class => "class",
            ClassType::Interface => "interface",
            ClassType::Anonymous => "anonymous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetricsRow {
    pub file: String,
    pub class_name: String,
    pub class_type: ClassType,
    pub metrics: BTreeMap<String, f64>,
}

/// Types treated as part of the platform and ignored by CBO.
const JDK_TYPES: &[&str] = &[
    "Object", "String", "Integer", "Long", "Double", "Float", "Short", "Byte", "Character", "Boolean", "Number", "Math",
    "System", "StringBuilder", "StringBuffer", "CharSequence", "Class", "Void", "Enum", "Iterable", "Comparable",
    "Runnable", "Thread", "Throwable", "Exception", "Error", "RuntimeException", "IOException",
    "IllegalArgumentException", "IllegalStateException", "NullPointerException", "UnsupportedOperationException",
    "IndexOutOfBoundsException", "ArithmeticException", "ClassCastException", "InterruptedException", "List",
    "ArrayList", "LinkedList", "Map", "HashMap", "TreeMap", "LinkedHashMap", "Set", "HashSet", "TreeSet",
    "LinkedHashSet", "Collection", "Collections", "Arrays", "Iterator", "Optional", "Objects", "Comparator",
    "Deque", "ArrayDeque", "Queue", "File", "InputStream", "OutputStream", "Reader", "Writer", "Override",
];

const PRIMITIVES: &[&str] = &["int", "long", "short", "byte", "char", "boolean", "float", "double", "void", "var"];

fn base_type(raw: &str) -> &str {
    let t = raw.trim().trim_end_matches("...").trim_end_matches("[]");
    let t = t.trim_end_matches("[]");
    t.rsplit('.').next().unwrap_or(t)
}

fn is_control_flow_decision(n: &AstNode) -> bool {
    match n.kind {
        NodeKind::If
        | NodeKind::While
        | NodeKind::For
        | NodeKind::ForEach
        | NodeKind::DoWhile
        | NodeKind::Case
        | NodeKind::Catch
        | NodeKind::Conditional => true,
        NodeKind::BinaryOp => matches!(n.text(), "&&" | "||"),
        _ => false,
    }
}

/// McCabe complexity of one method: decision points plus one.
pub fn cyclomatic_complexity(method: &AstNode) -> u32 {
    let mut c = 1;
    walk_own(method, &mut |n| {
        if is_control_flow_decision(n) {
            c += 1;
        }
    });
    c
}

fn own_methods(class: &AstNode) -> Vec<&AstNode> {
    class.children.iter().filter(|c| c.kind == NodeKind::MethodDecl).collect()
}

fn own_field_names(class: &AstNode) -> Vec<&str> {
    class.children.iter().filter(|c| c.kind == NodeKind::FieldDecl).flat_map(|f| f.children.iter().map(|d| d.text())).collect()
}

fn fields_used<'a>(method: &'a AstNode, fields: &HashSet<&str>) -> HashSet<&'a str> {
    let mut used = HashSet::new();
    walk_own(method, &mut |n| match n.kind {
        NodeKind::Identifier if fields.contains(n.text()) => {
            used.insert(n.text());
        }
        NodeKind::FieldAccess
            if fields.contains(n.text()) && n.children[0].kind == NodeKind::Identifier && n.children[0].text() == "this" =>
        {
            used.insert(n.text());
        }
        _ => {}
    });
    used
}

/// LCOM1: the number of method pairs whose field sets do not intersect.
fn lcom1(class: &AstNode) -> usize {
    let fields: HashSet<&str> = own_field_names(class).into_iter().collect();
    let uses: Vec<HashSet<&str>> = own_methods(class).into_iter().map(|m| fields_used(m, &fields)).collect();
    let mut pairs = 0;
    for i in 0..uses.len() {
        for j in i + 1..uses.len() {
            if uses[i].is_disjoint(&uses[j]) {
                pairs += 1;
            }
        }
    }
    pairs
}

fn coupled_types(class: &AstNode) -> BTreeSet<String> {
    let mut raw: Vec<&str> = Vec::new();
    if let Some(sup) = class.type_name.as_deref() {
        raw.push(sup);
    }
    walk_own(class, &mut |n| {
        match n.kind {
            NodeKind::TypeRef => raw.push(n.text()),
            NodeKind::FieldDecl
            | NodeKind::LocalVarDecl
            | NodeKind::Parameter
            | NodeKind::MethodDecl
            | NodeKind::New
            | NodeKind::NewArray
            | NodeKind::Cast
            | NodeKind::InstanceOf
            | NodeKind::ClassLiteral => raw.extend(n.type_name.as_deref()),
            NodeKind::Catch => raw.extend(n.type_name.as_deref().unwrap_or("").split('|')),
            // Static member access through a capitalized receiver, as in `Util.check(x)`.
            NodeKind::Call | NodeKind::FieldAccess if n.children.len() > 1 || n.kind == NodeKind::FieldAccess => {
                let recv = &n.children[0];
                if recv.kind == NodeKind::Identifier && recv.text().starts_with(|c: char| c.is_ascii_uppercase()) {
                    raw.push(recv.text());
                }
            }
            _ => {}
        }
        // Anonymous classes couple to the type they instantiate.
        for c in &n.children {
            if c.kind == NodeKind::ClassDecl {
                raw.extend(c.type_name.as_deref());
            }
        }
    });
    let own = class.text();
    raw.into_iter()
        .map(base_type)
        .filter(|t| !t.is_empty() && *t != own && !PRIMITIVES.contains(t) && !JDK_TYPES.contains(t))
        .map(str::to_string)
        .collect()
}

fn depth_of_inheritance(class: &AstNode, supers: &HashMap<&str, Option<&str>>) -> usize {
    let mut depth = 1;
    let mut seen = HashSet::new();
    let mut cur = class.type_name.as_deref().map(base_type);
    while let Some(name) = cur {
        match supers.get(name) {
            Some(next) if seen.insert(name) => {
                depth += 1;
                cur = next.map(base_type);
            }
            _ => break,
        }
    }
    depth
}

fn class_row(class: &AstNode, supers: &HashMap<&str, Option<&str>>, file: &str) -> ClassMetricsRow {
    let methods = own_methods(class);
    let mut m: BTreeMap<String, f64> = METRIC_NAMES.iter().map(|n| (n.to_string(), 0.0)).collect();
    let mut set = |k: &str, v: usize| {
        m.insert(k.to_string(), v as f64);
    };

    let mut returns = 0;
    let mut loops = 0;
    let mut comparisons = 0;
    let mut tries = 0;
    let mut strings = 0;
    let mut numbers = 0;
    let mut math = 0;
    let mut variables = 0;
    let mut invoked = BTreeSet::new();
    walk_own(class, &mut |n| match n.kind {
        NodeKind::Return => returns += 1,
        k if k.is_loop() => loops += 1,
        NodeKind::BinaryOp => match n.text() {
            "==" | "!=" | "<" | ">" | "<=" | ">=" => comparisons += 1,
            "+" | "-" | "*" | "/" | "%" => math += 1,
            _ => {}
        },
        NodeKind::Try => tries += 1,
        NodeKind::Literal => match n.literal_kind() {
            Some(LiteralKind::String) => strings += 1,
            Some(LiteralKind::Number) => numbers += 1,
            _ => {}
        },
        NodeKind::LocalVarDecl => variables += n.children.len(),
        NodeKind::Call => {
            invoked.insert(n.text());
        }
        _ => {}
    });

    let max_nesting = methods.iter().flat_map(|mt| control_depths(mt)).map(|(_, d)| d).max().unwrap_or(0);
    set("wmc", methods.iter().map(|mt| cyclomatic_complexity(mt) as usize).sum());
    set("dit", depth_of_inheritance(class, supers));
    set("cbo", coupled_types(class).len());
    set("rfc", methods.len() + invoked.len());
    set("lcom", lcom1(class));
    set("loc", class.span.lines() as usize);
    set("method_count", methods.len());
    set("field_count", own_field_names(class).len());
    set("static_method_count", methods.iter().filter(|mt| mt.modifiers.contains(Modifiers::STATIC)).count());
    set("return_count", returns);
    set("loop_count", loops);
    set("comparison_count", comparisons);
    set("try_count", tries);
    set("string_literal_count", strings);
    set("number_literal_count", numbers);
    set("math_op_count", math);
    set("variable_count", variables);
    set("max_nesting", max_nesting as usize);

    let class_type = if class.modifiers.contains(Modifiers::ANONYMOUS) {
        ClassType::Anonymous
    } else if class.modifiers.contains(Modifiers::INTERFACE) {
        ClassType::Interface
    } else {
        ClassType::Class
    };
    let class_name = match class_type {
        ClassType::Anonymous => format!("new {}", class.type_name.as_deref().unwrap_or("Object")),
        _ => class.text().to_string(),
    };
    ClassMetricsRow { file: file.to_string(), class_name, class_type, metrics: m }
}

/// One row per class declaration in the tree, anonymous classes included.
pub fn class_metrics(ast: &AstNode, file: &str) -> Vec<ClassMetricsRow> {
    let classes = ast.classes();
    let supers: HashMap<&str, Option<&str>> = classes
        .iter()
        .filter(|c| !c.modifiers.contains(Modifiers::ANONYMOUS))
        .map(|c| (c.text(), c.type_name.as_deref()))
        .collect();
    classes.into_iter().map(|c| class_row(c, &supers, file)).collect()
}

/// Feature names of the per-file vector, sorted.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = METRIC_NAMES.iter().map(|s| s.to_string()).collect();
    names.push("parse_error".into());
    names.sort();
    names
}

/// Per-metric sum over the rows of one file.
pub fn file_metrics_vector(rows: &[ClassMetricsRow]) -> FeatureVector {
    let mut map: BTreeMap<String, f64> = feature_names().into_iter().map(|n| (n, 0.0)).collect();
    for row in rows {
        for (k, v) in &row.metrics {
            *map.get_mut(k).expect("metric ids are fixed") += v;
        }
    }
    FeatureVector::from_map(&map)
}

/// Parses `text` and returns its metric vector; zeros with `parse_error=1` on failure.
pub fn metrics_vector(text: &str) -> FeatureVector {
    match parse_file(text) {
        Ok(ast) => file_metrics_vector(&class_metrics(&ast, "")),
        Err(_) => {
            let mut v = FeatureVector::zeros(&feature_names());
            v.set("parse_error", 1.0);
            v
        }
    }
}
