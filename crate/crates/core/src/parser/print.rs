//! Source rendering of a syntax tree.
//!
//! Output is valid input for the parser; expressions are fully
//! parenthesized so re-parsing reproduces the same node structure.

use super::ast::{AstNode, Modifiers, NodeKind};

pub fn to_source(root: &AstNode) -> String {
    let mut out = String::new();
    Printer { out: &mut out, indent: 0 }.node(root);
    out
}

struct Printer<'a> {
    out: &'a mut String,
    indent: usize,
}

impl Printer<'_> {
    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn mods(m: Modifiers) -> String {
        let kws = m.keywords();
        if kws.is_empty() {
            String::new()
        } else {
            format!("{} ", kws.join(" "))
        }
    }

    fn node(&mut self, n: &AstNode) {
        match n.kind {
            NodeKind::CompilationUnit => {
                for c in &n.children {
                    self.node(c);
                }
            }
            NodeKind::ClassDecl => {
                let interface = n.modifiers.contains(Modifiers::INTERFACE);
                let mut head = format!("{}{} {}", Self::mods(n.modifiers), if interface { "interface" } else { "class" }, n.text());
                if let Some(sup) = &n.type_name {
                    head.push_str(&format!(" extends {sup}"));
                }
                let refs: Vec<&str> = n.children.iter().filter(|c| c.kind == NodeKind::TypeRef).map(|c| c.text()).collect();
                if !refs.is_empty() {
                    head.push_str(if interface { " extends " } else { " implements " });
                    head.push_str(&refs.join(", "));
                }
                head.push_str(" {");
                self.line(&head);
                self.members(n);
                self.line("}");
            }
            NodeKind::MethodDecl => {
                let params: Vec<String> = n.parameters().map(|p| format!("{}{} {}", Self::mods(p.modifiers), p.type_name.as_deref().unwrap_or("Object"), p.text())).collect();
                let ret = if n.modifiers.contains(Modifiers::CONSTRUCTOR) {
                    String::new()
                } else {
                    format!("{} ", n.type_name.as_deref().unwrap_or("void"))
                };
                let head = format!("{}{}{}({})", Self::mods(n.modifiers), ret, n.text(), params.join(", "));
                match n.body() {
                    Some(body) => {
                        self.line(&format!("{head} {{"));
                        self.block_body(body);
                        self.line("}");
                    }
                    None => self.line(&format!("{head};")),
                }
            }
            NodeKind::FieldDecl | NodeKind::LocalVarDecl => {
                let s = format!("{};", decl(n));
                self.line(&s);
            }
            NodeKind::Block => {
                let head = if n.modifiers.contains(Modifiers::STATIC) { "static {" } else { "{" };
                self.line(head);
                self.block_body(n);
                self.line("}");
            }
            NodeKind::If => {
                self.line(&format!("if ({})", expr(&n.children[0])));
                self.nested(&n.children[1]);
                if let Some(e) = n.children.get(2) {
                    self.line("else");
                    self.nested(e);
                }
            }
            NodeKind::While => {
                self.line(&format!("while ({})", expr(&n.children[0])));
                self.nested(&n.children[1]);
            }
            NodeKind::DoWhile => {
                self.line("do");
                self.nested(&n.children[0]);
                self.line(&format!("while ({});", expr(&n.children[1])));
            }
            NodeKind::For => {
                let init = &n.children[0];
                let init_s = match init.children.first() {
                    Some(d) if d.kind == NodeKind::LocalVarDecl => decl(d),
                    _ => init.children.iter().map(|s| expr(&s.children[0])).collect::<Vec<_>>().join(", "),
                };
                let cond = n.children[1].children.first().map(expr).unwrap_or_default();
                let upd = n.children[2].children.iter().map(|s| expr(&s.children[0])).collect::<Vec<_>>().join(", ");
                self.line(&format!("for ({init_s}; {cond}; {upd})"));
                self.nested(&n.children[3]);
            }
            NodeKind::ForEach => {
                self.line(&format!("for ({} : {})", decl(&n.children[0]), expr(&n.children[1])));
                self.nested(&n.children[2]);
            }
            NodeKind::Switch => {
                self.line(&format!("switch ({}) {{", expr(&n.children[0])));
                for case in &n.children[1..] {
                    let stmts = if case.kind == NodeKind::Case {
                        self.line(&format!("case {}:", expr(&case.children[0])));
                        &case.children[1..]
                    } else {
                        self.line("default:");
                        &case.children[..]
                    };
                    self.indent += 1;
                    for s in stmts {
                        self.node(s);
                    }
                    self.indent -= 1;
                }
                self.line("}");
            }
            NodeKind::Try => {
                let mut rest = &n.children[..];
                if rest[0].kind == NodeKind::Resources {
                    let rs: Vec<String> = rest[0]
                        .children
                        .iter()
                        .map(|r| if r.kind == NodeKind::LocalVarDecl { decl(r) } else { expr(&r.children[0]) })
                        .collect();
                    self.line(&format!("try ({})", rs.join("; ")));
                    rest = &rest[1..];
                } else {
                    self.line("try");
                }
                self.node(&rest[0]);
                for h in &rest[1..] {
                    match h.kind {
                        NodeKind::Catch => self.line(&format!("catch ({} {})", h.type_name.as_deref().unwrap_or("Exception"), h.text())),
                        _ => self.line("finally"),
                    }
                    self.node(&h.children[0]);
                }
            }
            NodeKind::Return => match n.children.first() {
                Some(e) => self.line(&format!("return {};", expr(e))),
                None => self.line("return;"),
            },
            NodeKind::Throw => self.line(&format!("throw {};", expr(&n.children[0]))),
            NodeKind::Break => self.line("break;"),
            NodeKind::Continue => self.line("continue;"),
            NodeKind::Empty => self.line(";"),
            NodeKind::Synchronized => {
                self.line(&format!("synchronized ({})", expr(&n.children[0])));
                self.node(&n.children[1]);
            }
            NodeKind::Assert => {
                let msg = n.children.get(1).map(|m| format!(" : {}", expr(m))).unwrap_or_default();
                self.line(&format!("assert {}{msg};", expr(&n.children[0])));
            }
            NodeKind::ExprStatement => self.line(&format!("{};", expr(&n.children[0]))),
            _ => self.line(&format!("{};", expr(n))),
        }
    }

    fn members(&mut self, class: &AstNode) {
        self.indent += 1;
        for m in class.children.iter().filter(|c| c.kind != NodeKind::TypeRef) {
            self.node(m);
        }
        self.indent -= 1;
    }

    fn block_body(&mut self, block: &AstNode) {
        self.indent += 1;
        for s in &block.children {
            self.node(s);
        }
        self.indent -= 1;
    }

    fn nested(&mut self, s: &AstNode) {
        if s.kind == NodeKind::Block {
            self.node(s);
        } else {
            self.indent += 1;
            self.node(s);
            self.indent -= 1;
        }
    }
}

fn decl(n: &AstNode) -> String {
    let vars: Vec<String> = n
        .children
        .iter()
        .map(|d| match d.children.first() {
            Some(init) => format!("{} = {}", d.text(), expr(init)),
            None => d.text().to_string(),
        })
        .collect();
    format!("{}{} {}", Printer::mods(n.modifiers), n.type_name.as_deref().unwrap_or("Object"), vars.join(", "))
}

fn args(n: &AstNode) -> String {
    n.children.iter().map(expr).collect::<Vec<_>>().join(", ")
}

fn expr(n: &AstNode) -> String {
    match n.kind {
        NodeKind::Identifier | NodeKind::Literal | NodeKind::Lambda | NodeKind::MethodRef => n.text().to_string(),
        NodeKind::ClassLiteral => format!("{}.class", n.type_name.as_deref().unwrap_or("Object")),
        NodeKind::BinaryOp => format!("({} {} {})", expr(&n.children[0]), n.text(), expr(&n.children[1])),
        NodeKind::Assign => format!("({} {} {})", expr(&n.children[0]), n.text(), expr(&n.children[1])),
        NodeKind::UnaryOp if n.modifiers.contains(Modifiers::POSTFIX) => format!("({}{})", expr(&n.children[0]), n.text()),
        NodeKind::UnaryOp => format!("({} {})", n.text(), expr(&n.children[0])),
        NodeKind::Conditional => format!("({} ? {} : {})", expr(&n.children[0]), expr(&n.children[1]), expr(&n.children[2])),
        NodeKind::InstanceOf => format!("({} instanceof {})", expr(&n.children[0]), n.type_name.as_deref().unwrap_or("Object")),
        NodeKind::Cast => format!("(({}) {})", n.type_name.as_deref().unwrap_or("Object"), expr(&n.children[0])),
        NodeKind::FieldAccess => format!("{}.{}", expr(&n.children[0]), n.text()),
        NodeKind::ArrayAccess => format!("{}[{}]", expr(&n.children[0]), expr(&n.children[1])),
        NodeKind::Call => match n.children.len() {
            1 => format!("{}({})", n.text(), args(&n.children[0])),
            _ => format!("{}.{}({})", expr(&n.children[0]), n.text(), args(&n.children[1])),
        },
        NodeKind::New => {
            let mut s = format!("new {}({})", n.type_name.as_deref().unwrap_or("Object"), args(&n.children[0]));
            if let Some(body) = n.children.get(1) {
                let mut inner = String::new();
                let mut p = Printer { out: &mut inner, indent: 0 };
                p.members(body);
                s.push_str(" {\n");
                s.push_str(&inner);
                s.push('}');
            }
            s
        }
        NodeKind::NewArray => {
            let ty = n.type_name.as_deref().unwrap_or("Object[]");
            let base = ty.trim_end_matches("[]");
            let total = (ty.len() - base.len()) / 2;
            let (dims, init): (Vec<&AstNode>, Option<&AstNode>) = match n.children.last() {
                Some(last) if last.kind == NodeKind::ArrayInit => (n.children[..n.children.len() - 1].iter().collect(), Some(last)),
                _ => (n.children.iter().collect(), None),
            };
            let mut s = format!("new {base}");
            for d in &dims {
                s.push_str(&format!("[{}]", expr(d)));
            }
            for _ in dims.len()..total {
                s.push_str("[]");
            }
            if let Some(init) = init {
                s.push(' ');
                s.push_str(&expr(init));
            }
            s
        }
        NodeKind::ArrayInit => format!("{{{}}}", args(n)),
        _ => format!("/* {} */", n.kind),
    }
}
