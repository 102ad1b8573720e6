//! Pattern-rule linter: a fixed catalog of twenty rules over the syntax tree
//! and the raw source lines, reported as per-rule violation counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embedding::FeatureVector;
use crate::parser::ast::control_depths;
use crate::parser::{methods, parse_file, AstNode, LiteralKind, Modifiers, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ErrorProne,
    Design,
    Style,
    Security,
    Size,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::ErrorProne => "error_prone",
            Category::Design => "design",
            Category::Style => "style",
            Category::Security => "security",
            Category::Size => "size",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub long_method_lines: u32,
    pub long_line_chars: usize,
    pub max_nesting: u32,
    pub max_parameters: usize,
    pub god_class_lines: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { long_method_lines: 60, long_line_chars: 120, max_nesting: 4, max_parameters: 6, god_class_lines: 500 }
    }
}

/// What a matcher sees: the tree (absent after a parse failure) and the lines.
pub struct Source<'a> {
    pub ast: Option<&'a AstNode>,
    pub lines: Vec<&'a str>,
}

/// Appends one raw violation id per finding. Raw ids may carry a suffix with
/// details (`UnusedPrivateField:count`), removed by [`normalize_rule_id`].
type Matcher = fn(&Source<'_>, &Thresholds, &mut Vec<String>);

#[derive(Clone)]
pub struct Rule {
    pub id: &'static str,
    pub category: Category,
    pub description: &'static str,
    pub threshold: Option<f64>,
    /// Evaluated on raw text, so it still runs when parsing failed.
    pub text_based: bool,
    matcher: Matcher,
}

impl std::fmt::Debug for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Rule").field("id", &self.id).field("category", &self.category).finish()
    }
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub name: &'static str,
    pub rules: Vec<Rule>,
    pub thresholds: Thresholds,
}

pub type ViolationCounts = BTreeMap<String, u64>;

fn all_rules(t: &Thresholds) -> Vec<Rule> {
    use Category::*;
    let rule = |id, category, description, threshold: Option<f64>, text_based, matcher: Matcher| Rule {
        id,
        category,
        description,
        threshold,
        text_based,
        matcher,
    };
    vec![
        rule("EmptyCatchBlock", ErrorProne, "catch clause with an empty block", None, false, empty_catch),
        rule("CatchBroadException", ErrorProne, "catches Exception or Throwable", None, false, catch_broad),
        rule("EmptyIf", ErrorProne, "if statement with an empty then-branch", None, false, empty_if),
        rule("EmptyWhile", ErrorProne, "while loop with an empty body", None, false, empty_while),
        rule("MissingBracesIf", Style, "if or else branch without braces", None, false, missing_braces),
        rule("MissingSwitchDefault", Style, "switch without a default label", None, false, missing_default),
        rule("MagicNumber", Style, "numeric literal other than -1, 0, 1, 2 outside a declaration initializer", None, false, magic_number),
        rule("LongMethod", Size, "method spanning more lines than the threshold", Some(t.long_method_lines as f64), false, long_method),
        rule("LongLine", Size, "line longer than the threshold in characters", Some(t.long_line_chars as f64), true, long_line),
        rule("DeepNesting", Design, "control statement nested deeper than the threshold", Some(t.max_nesting as f64), false, deep_nesting),
        rule("TooManyParameters", Size, "method with more parameters than the threshold", Some(t.max_parameters as f64), false, too_many_params),
        rule("SystemOutPrint", Security, "print to System.out or System.err", None, false, system_out),
        rule("PrintStackTrace", Security, "call to printStackTrace()", None, false, print_stack_trace),
        rule("StringEqualsOperator", ErrorProne, "== or != with a string literal operand", None, false, string_equals_op),
        rule("HardcodedSecretString", Security, "string literal assigned to a password, secret or token name", None, false, hardcoded_secret),
        rule("EmptyFinally", ErrorProne, "finally clause with an empty block", None, false, empty_finally),
        rule("ReturnInFinally", ErrorProne, "return statement inside a finally block", None, false, return_in_finally),
        rule("UnusedPrivateField", Design, "private field that is never read", None, false, unused_private_field),
        rule("SwitchFallthrough", ErrorProne, "non-empty case group that falls through to the next", None, false, switch_fallthrough),
        rule("GodClass", Size, "class spanning more lines than the threshold", Some(t.god_class_lines as f64), true, god_class),
    ]
}

impl Catalog {
    pub fn strict() -> Self {
        Self::strict_with(Thresholds::default())
    }

    pub fn strict_with(thresholds: Thresholds) -> Self {
        Catalog { name: "strict", rules: all_rules(&thresholds), thresholds }
    }

    pub fn style() -> Self {
        Self::style_with(Thresholds::default())
    }

    /// The style and size rules only.
    pub fn style_with(thresholds: Thresholds) -> Self {
        let rules = all_rules(&thresholds)
            .into_iter()
            .filter(|r| matches!(r.category, Category::Style | Category::Size))
            .collect();
        Catalog { name: "style", rules, thresholds }
    }

    pub fn by_name(name: &str, thresholds: Thresholds) -> Option<Self> {
        match name {
            "strict" => Some(Self::strict_with(thresholds)),
            "style" => Some(Self::style_with(thresholds)),
            _ => None,
        }
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Feature names of the per-file vector: rule ids plus `parse_error`, sorted.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.rules.iter().map(|r| r.id.to_string()).collect();
        names.push("parse_error".into());
        names.sort();
        names
    }
}

/// Strips any detail suffix (identifier, literal, position) from a raw id.
pub fn normalize_rule_id(raw: &str) -> String {
    let end = raw.find([':', '(', '[', ' ', '@']).unwrap_or(raw.len());
    raw[..end].to_string()
}

/// Counts violations per catalog rule. When `ast` is `None` (parse failure)
/// only text-based rules run; the others report 0.
pub fn run_rules(ast: Option<&AstNode>, text: &str, catalog: &Catalog) -> ViolationCounts {
    let src = Source { ast, lines: text.lines().collect() };
    let mut counts: ViolationCounts = catalog.rules.iter().map(|r| (r.id.to_string(), 0)).collect();
    for rule in &catalog.rules {
        if ast.is_none() && !rule.text_based {
            continue;
        }
        let mut raw = Vec::new();
        (rule.matcher)(&src, &catalog.thresholds, &mut raw);
        for r in raw {
            if let Some(c) = counts.get_mut(&normalize_rule_id(&r)) {
                *c += 1;
            }
        }
    }
    counts
}

/// Parses `text` and returns its violation counts as a feature vector.
pub fn lint_vector(text: &str, catalog: &Catalog) -> FeatureVector {
    let parsed = parse_file(text);
    let counts = run_rules(parsed.as_ref().ok(), text, catalog);
    let mut map: BTreeMap<String, f64> = counts.into_iter().map(|(k, v)| (k, v as f64)).collect();
    map.insert("parse_error".into(), if parsed.is_err() { 1.0 } else { 0.0 });
    FeatureVector::from_map(&map)
}

/// Pre-order visit passing the ancestor chain (nearest last).
fn visit_with_parents<'a>(root: &'a AstNode, f: &mut impl FnMut(&'a AstNode, &[&'a AstNode])) {
    fn go<'a>(n: &'a AstNode, stack: &mut Vec<&'a AstNode>, f: &mut impl FnMut(&'a AstNode, &[&'a AstNode])) {
        f(n, stack);
        stack.push(n);
        for c in &n.children {
            go(c, stack, f);
        }
        stack.pop();
    }
    go(root, &mut Vec::new(), f);
}

fn nodes<'a>(src: &Source<'a>, kind: NodeKind) -> impl Iterator<Item = &'a AstNode> {
    src.ast.into_iter().flat_map(move |a| a.walk().filter(move |n| n.kind == kind))
}

fn empty_catch(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    for c in nodes(src, NodeKind::Catch) {
        if c.children[0].is_empty_block() {
            out.push(format!("EmptyCatchBlock:{}", c.text()));
        }
    }
}

fn catch_broad(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    for c in nodes(src, NodeKind::Catch) {
        let types = c.type_name.as_deref().unwrap_or("");
        let broad = types.split('|').map(|t| t.trim().rsplit('.').next().unwrap_or("")).any(|t| t == "Exception" || t == "Throwable");
        if broad {
            out.push("CatchBroadException".into());
        }
    }
}

fn empty_if(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    for n in nodes(src, NodeKind::If) {
        if n.children[1].is_empty_block() {
            out.push("EmptyIf".into());
        }
    }
}

fn empty_while(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    for n in nodes(src, NodeKind::While) {
        if n.children[1].is_empty_block() {
            out.push("EmptyWhile".into());
        }
    }
}

fn missing_braces(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    for n in nodes(src, NodeKind::If) {
        let then_bare = n.children[1].kind != NodeKind::Block;
        let else_bare = n.children.get(2).is_some_and(|e| !matches!(e.kind, NodeKind::Block | NodeKind::If));
        if then_bare || else_bare {
            out.push(format!("MissingBracesIf@{}", n.span.start_line));
        }
    }
}

fn missing_default(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    for n in nodes(src, NodeKind::Switch) {
        if !n.children.iter().any(|c| c.kind == NodeKind::Default) {
            out.push("MissingSwitchDefault".into());
        }
    }
}

fn numeric_value(token: &str) -> Option<f64> {
    let t = token.replace('_', "").to_ascii_lowercase();
    if let Some(hex) = t.strip_prefix("0x") {
        return i64::from_str_radix(hex.trim_end_matches('l'), 16).ok().map(|v| v as f64);
    }
    if let Some(bin) = t.strip_prefix("0b") {
        return i64::from_str_radix(bin.trim_end_matches('l'), 2).ok().map(|v| v as f64);
    }
    t.trim_end_matches(['l', 'f', 'd']).parse().ok()
}

fn magic_number(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    let Some(ast) = src.ast else { return };
    visit_with_parents(ast, &mut |n, parents| {
        if n.literal_kind() != Some(LiteralKind::Number) {
            return;
        }
        if numeric_value(n.text()).is_some_and(|v| [0.0, 1.0, 2.0].contains(&v)) {
            return;
        }
        // Walk up through a sign to see whether this initializes a declaration.
        let mut up = parents.iter().rev();
        let mut p = up.next();
        if p.is_some_and(|p| p.kind == NodeKind::UnaryOp && matches!(p.text(), "-" | "+")) {
            p = up.next();
        }
        if p.is_some_and(|p| p.kind == NodeKind::VarDeclarator) {
            return;
        }
        out.push(format!("MagicNumber:{}", n.text()));
    });
}

fn long_method(src: &Source<'_>, t: &Thresholds, out: &mut Vec<String>) {
    let Some(ast) = src.ast else { return };
    for m in methods(ast) {
        if m.body().is_some() && m.span.lines() > t.long_method_lines {
            out.push(format!("LongMethod({} lines)", m.span.lines()));
        }
    }
}

fn long_line(src: &Source<'_>, t: &Thresholds, out: &mut Vec<String>) {
    for (i, line) in src.lines.iter().enumerate() {
        if line.trim_end_matches('\r').chars().count() > t.long_line_chars {
            out.push(format!("LongLine@{}", i + 1));
        }
    }
}

fn deep_nesting(src: &Source<'_>, t: &Thresholds, out: &mut Vec<String>) {
    let Some(ast) = src.ast else { return };
    for m in methods(ast) {
        for (n, depth) in control_depths(m) {
            if depth > t.max_nesting {
                out.push(format!("DeepNesting({}@{})", depth, n.span.start_line));
            }
        }
    }
}

fn too_many_params(src: &Source<'_>, t: &Thresholds, out: &mut Vec<String>) {
    let Some(ast) = src.ast else { return };
    for m in methods(ast) {
        if m.parameters().count() > t.max_parameters {
            out.push(format!("TooManyParameters:{}", m.text()));
        }
    }
}

fn system_out(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    for c in nodes(src, NodeKind::Call) {
        if !matches!(c.text(), "print" | "println" | "printf") || c.children.len() != 2 {
            continue;
        }
        let recv = &c.children[0];
        let is_std = recv.kind == NodeKind::FieldAccess
            && matches!(recv.text(), "out" | "err")
            && recv.children[0].kind == NodeKind::Identifier
            && recv.children[0].text() == "System";
        if is_std {
            out.push("SystemOutPrint".into());
        }
    }
}

fn print_stack_trace(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    for c in nodes(src, NodeKind::Call) {
        let no_args = c.children.last().is_some_and(|a| a.children.is_empty());
        if c.text() == "printStackTrace" && no_args {
            out.push("PrintStackTrace".into());
        }
    }
}

fn is_string_literal(n: &AstNode) -> bool {
    n.literal_kind() == Some(LiteralKind::String)
}

fn string_equals_op(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    for n in nodes(src, NodeKind::BinaryOp) {
        if matches!(n.text(), "==" | "!=") && n.children.iter().any(is_string_literal) {
            out.push("StringEqualsOperator".into());
        }
    }
}

fn secret_name(name: &str) -> bool {
    const MARKERS: [&str; 8] = ["password", "passwd", "pwd", "secret", "token", "apikey", "api_key", "credential"];
    let lower = name.to_ascii_lowercase();
    MARKERS.iter().any(|m| lower.contains(m))
}

fn non_empty_string(n: &AstNode) -> bool {
    is_string_literal(n) && n.text() != "\"\""
}

fn hardcoded_secret(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    let Some(ast) = src.ast else { return };
    for n in ast.walk() {
        let target = match n.kind {
            NodeKind::VarDeclarator => n.children.first().filter(|i| non_empty_string(i)).map(|_| n.text()),
            NodeKind::Assign if n.text() == "=" && non_empty_string(&n.children[1]) => {
                let lhs = &n.children[0];
                matches!(lhs.kind, NodeKind::Identifier | NodeKind::FieldAccess).then(|| lhs.text())
            }
            _ => None,
        };
        if let Some(name) = target.filter(|t| secret_name(t)) {
            out.push(format!("HardcodedSecretString:{name}"));
        }
    }
}

fn empty_finally(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    for n in nodes(src, NodeKind::Finally) {
        if n.children[0].is_empty_block() {
            out.push("EmptyFinally".into());
        }
    }
}

fn return_in_finally(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    for f in nodes(src, NodeKind::Finally) {
        crate::parser::ast::walk_own(f, &mut |n| {
            if n.kind == NodeKind::Return {
                out.push(format!("ReturnInFinally@{}", n.span.start_line));
            }
        });
    }
}

fn unused_private_field(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    let Some(ast) = src.ast else { return };
    for class in ast.classes() {
        let fields: Vec<&str> = class
            .children
            .iter()
            .filter(|m| m.kind == NodeKind::FieldDecl && m.modifiers.contains(Modifiers::PRIVATE))
            .flat_map(|m| m.children.iter().map(|d| d.text()))
            .collect();
        if fields.is_empty() {
            continue;
        }
        let mut read = std::collections::HashSet::new();
        visit_with_parents(class, &mut |n, parents| {
            let name = match n.kind {
                NodeKind::Identifier => n.text(),
                NodeKind::FieldAccess if n.children[0].kind == NodeKind::Identifier && n.children[0].text() == "this" => n.text(),
                _ => return,
            };
            // Plain assignment targets are writes, not reads.
            let written = parents.last().is_some_and(|p| p.kind == NodeKind::Assign && p.text() == "=" && std::ptr::eq(&p.children[0], n));
            if !written {
                read.insert(name);
            }
        });
        for f in fields {
            if !read.contains(f) {
                out.push(format!("UnusedPrivateField:{f}"));
            }
        }
    }
}

fn terminates(s: &AstNode) -> bool {
    match s.kind {
        NodeKind::Break | NodeKind::Return | NodeKind::Throw | NodeKind::Continue => true,
        NodeKind::Block => s.children.last().is_some_and(terminates),
        NodeKind::If => s.children.len() == 3 && terminates(&s.children[1]) && terminates(&s.children[2]),
        _ => false,
    }
}

fn switch_fallthrough(src: &Source<'_>, _: &Thresholds, out: &mut Vec<String>) {
    for sw in nodes(src, NodeKind::Switch) {
        let groups = &sw.children[1..];
        for g in groups.iter().take(groups.len().saturating_sub(1)) {
            let stmts = if g.kind == NodeKind::Case { &g.children[1..] } else { &g.children[..] };
            if stmts.last().is_some_and(|s| !terminates(s)) {
                out.push(format!("SwitchFallthrough@{}", g.span.start_line));
            }
        }
    }
}

fn god_class(src: &Source<'_>, t: &Thresholds, out: &mut Vec<String>) {
    match src.ast {
        Some(ast) => {
            for c in ast.classes() {
                if c.span.lines() > t.god_class_lines {
                    out.push(format!("GodClass:{}", c.text()));
                }
            }
        }
        None => {
            if src.lines.len() > t.god_class_lines as usize {
                out.push("GodClass(file)".into());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(src: &str, rule: &str) -> u64 {
        let ast = parse_file(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
        run_rules(Some(&ast), src, &Catalog::strict())[rule]
    }

    fn wrap(body: &str) -> String {
        format!("class A {{\n  void f(int x, String s) {{\n    {body}\n  }}\n}}\n")
    }

    fn long_method_src() -> String {
        let mut s = String::from("class A {\n  void f() {\n");
        for i in 0..70 {
            s.push_str(&format!("    g({});\n", i % 2));
        }
        s.push_str("  }\n}\n");
        s
    }

    fn god_class_src(lines: usize) -> String {
        let mut s = String::from("class A {\n");
        for i in 0..lines {
            s.push_str(&format!("  int f{i};\n"));
        }
        s.push_str("}\n");
        s
    }

    #[test]
    fn catalog_has_twenty_unique_rules() {
        let c = Catalog::strict();
        assert_eq!(c.rules.len(), 20);
        let mut ids: Vec<&str> = c.rules.iter().map(|r| r.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 20);
        let style = Catalog::style();
        assert_eq!(style.rules.len(), 7);
        assert!(style.rules.iter().all(|r| matches!(r.category, Category::Style | Category::Size)));
    }

    #[test]
    fn every_rule_has_positive_and_negative_fixture() {
        let fixtures: Vec<(&str, String, String)> = vec![
            ("EmptyCatchBlock", wrap("try { g(); } catch (IOException e) { }"), wrap("try { g(); } catch (IOException e) { log(e); }")),
            ("CatchBroadException", wrap("try { g(); } catch (Exception e) { log(e); }"), wrap("try { g(); } catch (IOException e) { log(e); }")),
            ("EmptyIf", wrap("if (x > 0) { }"), wrap("if (x > 0) { g(); }")),
            ("EmptyWhile", wrap("while (x > 0) { }"), wrap("while (x > 0) { x--; }")),
            ("MissingBracesIf", wrap("if (x > 0) g();"), wrap("if (x > 0) { g(); } else if (x < 0) { h(); }")),
            ("MissingSwitchDefault", wrap("switch (x) { case 1: g(); break; }"), wrap("switch (x) { case 1: g(); break; default: h(); }")),
            ("MagicNumber", wrap("g(x * 37);"), wrap("int limit = 37; g(x * limit + 1);")),
            ("LongMethod", long_method_src(), wrap("g();")),
            ("LongLine", wrap(&format!("g(\"{}\");", "a".repeat(200))), wrap("g(\"short\");")),
            (
                "DeepNesting",
                wrap("if (x > 0) { while (x > 1) { for (;;) { if (x > 3) { if (x > 4) { g(); } } } } }"),
                wrap("if (x > 0) { while (x > 1) { for (;;) { if (x > 3) { g(); } } } }"),
            ),
            ("TooManyParameters", "class A { void f(int a, int b, int c, int d, int e, int f, int g) {} }".into(), wrap("g();")),
            ("SystemOutPrint", wrap("System.out.println(s);"), wrap("logger.println(s);")),
            ("PrintStackTrace", wrap("try { g(); } catch (IOException e) { e.printStackTrace(); }"), wrap("try { g(); } catch (IOException e) { e.printStackTrace(out); }")),
            ("StringEqualsOperator", wrap("if (s == \"admin\") { g(); }"), wrap("if (\"admin\".equals(s)) { g(); }")),
            ("HardcodedSecretString", wrap("String dbPassword = \"hunter2\";"), wrap("String dbPassword = read(); String label = \"hunter2\";")),
            ("EmptyFinally", wrap("try { g(); } finally { }"), wrap("try { g(); } finally { close(); }")),
            ("ReturnInFinally", "class A { int f() { try { g(); } finally { return 1; } } }".into(), "class A { int f() { try { g(); } finally { close(); } return 1; } }".into()),
            ("UnusedPrivateField", "class A { private int hits; void f() { hits = 3; } }".into(), "class A { private int hits; int f() { return this.hits; } }".into()),
            ("SwitchFallthrough", wrap("switch (x) { case 1: g(); case 2: h(); break; default: k(); }"), wrap("switch (x) { case 1: case 2: h(); break; default: k(); }")),
            ("GodClass", god_class_src(520), god_class_src(10)),
        ];
        assert_eq!(fixtures.len(), 20);
        for (rule, pos, neg) in &fixtures {
            assert!(count(pos, rule) >= 1, "{rule} should fire on\n{pos}");
            assert_eq!(count(neg, rule), 0, "{rule} should not fire on\n{neg}");
        }
    }

    #[test]
    fn empty_class_is_clean() {
        let counts = run_rules(Some(&parse_file("class A {}").unwrap()), "class A {}", &Catalog::strict());
        assert_eq!(counts.len(), 20);
        assert!(counts.values().all(|&c| c == 0));
    }

    #[test]
    fn two_empty_catch_blocks_count_two() {
        let src = wrap("try { g(); } catch (IOException e) { } try { h(); } catch (RuntimeException e) { }");
        assert_eq!(count(&src, "EmptyCatchBlock"), 2);
    }

    #[test]
    fn long_line_of_250_chars() {
        let src = format!("class A {{\n  String s = \"{}\";\n}}\n", "x".repeat(240));
        assert!(count(&src, "LongLine") >= 1);
    }

    #[test]
    fn normalize_strips_details_and_is_idempotent() {
        assert_eq!(normalize_rule_id("UnusedLocal:fooCounter"), "UnusedLocal");
        assert_eq!(normalize_rule_id("UnusedLocal"), "UnusedLocal");
        assert_eq!(normalize_rule_id("LongMethod(73 lines)"), "LongMethod");
        assert_eq!(normalize_rule_id("LongLine@12"), "LongLine");
        for raw in ["A:b", "A(b)", "A[3]", "A b", "A@1", "A"] {
            let once = normalize_rule_id(raw);
            assert_eq!(normalize_rule_id(&once), once);
        }
    }

    #[test]
    fn distinct_unused_fields_share_one_id() {
        let src = "class A { private int fooCounter; private int barCounter; }";
        assert_eq!(count(src, "UnusedPrivateField"), 2);
    }

    #[test]
    fn parse_failure_runs_text_rules_only() {
        let src = format!("class A {{ int f( \n{}\n", "x".repeat(300));
        let v = lint_vector(&src, &Catalog::strict());
        assert_eq!(v.get("parse_error"), Some(1.0));
        assert_eq!(v.get("LongLine"), Some(1.0));
        let ast_total: f64 = v.iter().filter(|(n, _)| !matches!(*n, "LongLine" | "parse_error")).map(|(_, x)| x).sum();
        assert_eq!(ast_total, 0.0);

        let mut big = god_class_src(600);
        big.push_str("class {");
        assert_eq!(lint_vector(&big, &Catalog::strict()).get("GodClass"), Some(1.0));
    }

    #[test]
    fn ast_rules_ignore_whitespace_reformatting() {
        let a = wrap("if (s == \"x\") g(); try { h(37); } catch (Exception e) { }");
        let b = a.replace(' ', "  ").replace(';', ";\n\n");
        let ca = run_rules(Some(&parse_file(&a).unwrap()), &a, &Catalog::strict());
        let cb = run_rules(Some(&parse_file(&b).unwrap()), &b, &Catalog::strict());
        for r in Catalog::strict().rules.iter().filter(|r| !r.text_based && r.id != "LongMethod") {
            assert_eq!(ca[r.id], cb[r.id], "{}", r.id);
        }
    }

    #[test]
    fn magic_number_exclusions() {
        assert_eq!(count(&wrap("g(-1, 0, 1, 2, 2.0);"), "MagicNumber"), 0);
        assert_eq!(count(&wrap("int k = -40; long m = 0xFFL;"), "MagicNumber"), 0);
        assert_eq!(count(&wrap("g(0x10, 3.5f, 1_000);"), "MagicNumber"), 3);
    }
}
