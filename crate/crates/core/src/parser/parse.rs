//! Recursive-descent parser for the supported Java subset.
//!
//! Annotations are dropped, type arguments are erased to raw names and
//! lambdas/method references are kept as opaque leaves carrying their source
//! tokens. Anything outside the subset (enums, labels, switch expressions,
//! local classes, text blocks, ...) produces a [`ParseFailure`].

use super::ast::{AstNode, Modifiers, NodeKind, Span};
use super::lexer::{tokenize, Token, TokenKind};
use super::ParseFailure;

const PRIMITIVES: &[&str] = &["boolean", "byte", "char", "short", "int", "long", "float", "double", "void"];

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>="];

type PResult<T> = Result<T, ParseFailure>;

/// Parses a whole source file into a `CompilationUnit` tree.
pub fn parse_file(text: &str) -> PResult<AstNode> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0 };
    p.compilation_unit()
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

fn binary_precedence(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" => 4,
        "&" => 5,
        "==" | "!=" => 6,
        "<" | ">" | "<=" | ">=" | "instanceof" => 7,
        "<<" | ">>" | ">>>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        _ => return None,
    })
}

impl Parser {
    fn peek(&self) -> &Token {
        self.peek_at(0)
    }

    fn peek_at(&self, ahead: usize) -> &Token {
        let last = self.toks.len() - 1;
        &self.toks[(self.pos + ahead).min(last)]
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is(text)
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    fn bump(&mut self) -> Token {
        let tok = self.peek().clone();
        if tok.kind != TokenKind::Eof {
            self.pos += 1;
        }
        tok
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, text: &str) -> PResult<Token> {
        if self.at(text) {
            Ok(self.bump())
        } else {
            Err(self.fail(format!("expected `{text}`")))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        if self.peek().kind == TokenKind::Ident {
            Ok(self.bump().text)
        } else {
            Err(self.fail("expected identifier"))
        }
    }

    fn fail(&self, message: impl Into<String>) -> ParseFailure {
        let tok = self.peek();
        let found = if tok.kind == TokenKind::Eof { "end of file".to_string() } else { format!("`{}`", tok.text) };
        ParseFailure { line: tok.line, column: tok.col, message: format!("{}, found {found}", message.into()) }
    }

    fn line(&self) -> u32 {
        self.peek().line
    }

    fn prev_line(&self) -> u32 {
        if self.pos == 0 {
            self.toks[0].line
        } else {
            self.toks[self.pos - 1].line
        }
    }

    fn span_from(&self, start: u32) -> Span {
        Span::new(start, self.prev_line().max(start))
    }

    fn node(&self, kind: NodeKind, start: u32) -> AstNode {
        AstNode::new(kind, self.span_from(start))
    }

    // ---- declarations -------------------------------------------------

    fn compilation_unit(&mut self) -> PResult<AstNode> {
        if self.at("package") {
            self.skip_past(";")?;
        }
        while self.at("import") {
            self.skip_past(";")?;
        }
        let mut classes = Vec::new();
        while !self.at_eof() {
            if self.eat(";") {
                continue;
            }
            let start = self.line();
            let mods = self.modifiers()?;
            classes.push(self.type_decl(mods, start)?);
        }
        let end = self.toks.iter().map(|t| t.line).max().unwrap_or(1);
        Ok(AstNode::new(NodeKind::CompilationUnit, Span::new(1, end.max(1))).with_children(classes))
    }

    fn skip_past(&mut self, text: &str) -> PResult<()> {
        while !self.at(text) {
            if self.at_eof() {
                return Err(self.fail(format!("expected `{text}`")));
            }
            self.bump();
        }
        self.bump();
        Ok(())
    }

    fn skip_annotation(&mut self) -> PResult<()> {
        self.expect("@")?;
        if self.at("interface") {
            return Err(self.fail("annotation type declarations are not supported"));
        }
        self.ident()?;
        while self.at(".") && self.peek_at(1).kind == TokenKind::Ident {
            self.bump();
            self.bump();
        }
        if self.at("(") {
            self.skip_balanced("(", ")")?;
        }
        Ok(())
    }

    fn skip_balanced(&mut self, open: &str, close: &str) -> PResult<()> {
        self.expect(open)?;
        let mut depth = 1usize;
        while depth > 0 {
            if self.at_eof() {
                return Err(self.fail(format!("expected `{close}`")));
            }
            let t = self.bump();
            if t.is(open) {
                depth += 1;
            } else if t.is(close) {
                depth -= 1;
            }
        }
        Ok(())
    }

    fn modifiers(&mut self) -> PResult<Modifiers> {
        let mut mods = Modifiers::empty();
        loop {
            if self.at("@") {
                self.skip_annotation()?;
                continue;
            }
            let tok = self.peek();
            if tok.kind != TokenKind::Keyword {
                break;
            }
            // `default` is only a modifier in front of an interface method.
            if tok.text == "default" && (self.peek_at(1).is(":") || self.peek_at(1).is("->")) {
                break;
            }
            match Modifiers::from_keyword(&tok.text) {
                Some(m) => {
                    // `synchronized (` opens a statement, not a modifier.
                    if tok.text == "synchronized" && self.peek_at(1).is("(") {
                        break;
                    }
                    mods.insert(m);
                    self.bump();
                }
                None => break,
            }
        }
        Ok(mods)
    }

    fn type_decl(&mut self, mods: Modifiers, start: u32) -> PResult<AstNode> {
        let mut mods = mods;
        let is_interface = if self.eat("class") {
            false
        } else if self.eat("interface") {
            true
        } else if self.at("enum") {
            return Err(self.fail("enum declarations are not supported"));
        } else {
            return Err(self.fail("expected class or interface declaration"));
        };
        if is_interface {
            mods.insert(Modifiers::INTERFACE);
        }
        let name = self.ident()?;
        if self.at("<") {
            self.skip_type_args()?;
        }
        let mut superclass = None;
        let mut refs = Vec::new();
        if self.eat("extends") {
            if is_interface {
                refs.extend(self.type_ref_list()?);
            } else {
                superclass = Some(self.parse_type()?);
            }
        }
        if self.eat("implements") {
            refs.extend(self.type_ref_list()?);
        }
        let mut members = self.class_body(&name)?;
        let mut children = refs;
        children.append(&mut members);
        let mut node = self.node(NodeKind::ClassDecl, start).with_text(name).with_children(children);
        node.modifiers = mods;
        node.type_name = superclass;
        Ok(node)
    }

    fn type_ref_list(&mut self) -> PResult<Vec<AstNode>> {
        let mut out = Vec::new();
        loop {
            let start = self.line();
            let ty = self.parse_type()?;
            out.push(self.node(NodeKind::TypeRef, start).with_text(ty));
            if !self.eat(",") {
                return Ok(out);
            }
        }
    }

    fn class_body(&mut self, class_name: &str) -> PResult<Vec<AstNode>> {
        self.expect("{")?;
        let mut members = Vec::new();
        while !self.eat("}") {
            if self.at_eof() {
                return Err(self.fail("expected `}`"));
            }
            if self.eat(";") {
                continue;
            }
            let start = self.line();
            let mods = self.modifiers()?;
            if self.at("{") {
                let mut block = self.block()?;
                block.modifiers = mods;
                members.push(block);
                continue;
            }
            if self.at("class") || self.at("interface") || self.at("enum") {
                members.push(self.type_decl(mods, start)?);
                continue;
            }
            if self.at("<") {
                self.skip_type_args()?;
            }
            // Constructor: the class name directly followed by `(`.
            if self.peek().kind == TokenKind::Ident && self.peek().text == class_name && self.peek_at(1).is("(") {
                let name = self.ident()?;
                let mut m = self.method_rest(name, None, start)?;
                m.modifiers = mods;
                m.modifiers.insert(Modifiers::CONSTRUCTOR);
                members.push(m);
                continue;
            }
            let ty = self.parse_type()?;
            let name = self.ident()?;
            if self.at("(") {
                let mut m = self.method_rest(name, Some(ty), start)?;
                m.modifiers = mods;
                members.push(m);
            } else {
                let decls = self.declarators_after_name(name)?;
                self.expect(";")?;
                let mut f = self.node(NodeKind::FieldDecl, start).with_type(ty).with_children(decls);
                f.modifiers = mods;
                members.push(f);
            }
        }
        Ok(members)
    }

    fn method_rest(&mut self, name: String, ret: Option<String>, start: u32) -> PResult<AstNode> {
        self.expect("(")?;
        let mut children = Vec::new();
        if !self.at(")") {
            loop {
                children.push(self.parameter()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        while self.at("[") && self.peek_at(1).is("]") {
            self.bump();
            self.bump();
        }
        if self.eat("throws") {
            loop {
                self.parse_type()?;
                if !self.eat(",") {
                    break;
                }
            }
        }
        if self.at("{") {
            children.push(self.block()?);
        } else if self.at("default") {
            return Err(self.fail("annotation defaults are not supported"));
        } else {
            self.expect(";")?;
        }
        let mut m = self.node(NodeKind::MethodDecl, start).with_text(name).with_children(children);
        m.type_name = ret;
        Ok(m)
    }

    fn parameter(&mut self) -> PResult<AstNode> {
        let start = self.line();
        let mods = self.modifiers()?;
        let mut ty = self.parse_type()?;
        if self.eat("...") {
            ty.push_str("...");
        }
        let name = self.ident()?;
        while self.at("[") && self.peek_at(1).is("]") {
            self.bump();
            self.bump();
            ty.push_str("[]");
        }
        let mut p = self.node(NodeKind::Parameter, start).with_text(name).with_type(ty);
        p.modifiers = mods;
        Ok(p)
    }

    fn declarators_after_name(&mut self, first: String) -> PResult<Vec<AstNode>> {
        let mut out = Vec::new();
        let mut name = first;
        let mut start = self.prev_line();
        loop {
            while self.at("[") && self.peek_at(1).is("]") {
                self.bump();
                self.bump();
            }
            let mut children = Vec::new();
            if self.eat("=") {
                children.push(self.var_init()?);
            }
            out.push(self.node(NodeKind::VarDeclarator, start).with_text(name).with_children(children));
            if !self.eat(",") {
                return Ok(out);
            }
            start = self.line();
            name = self.ident()?;
        }
    }

    fn var_init(&mut self) -> PResult<AstNode> {
        if self.at("{") {
            self.array_init()
        } else {
            self.expr()
        }
    }

    fn array_init(&mut self) -> PResult<AstNode> {
        let start = self.line();
        self.expect("{")?;
        let mut elems = Vec::new();
        while !self.at("}") {
            elems.push(self.var_init()?);
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        Ok(self.node(NodeKind::ArrayInit, start).with_children(elems))
    }

    // ---- types ----------------------------------------------------------

    fn skip_type_args(&mut self) -> PResult<()> {
        self.expect("<")?;
        let mut depth: i32 = 1;
        while depth > 0 {
            let t = self.peek().clone();
            match t.text.as_str() {
                "<" => depth += 1,
                ">" => depth -= 1,
                ">>" => depth -= 2,
                ">>>" => depth -= 3,
                _ => {
                    let ok = matches!(t.kind, TokenKind::Ident)
                        || PRIMITIVES.contains(&t.text.as_str())
                        || matches!(t.text.as_str(), "," | "." | "?" | "extends" | "super" | "&" | "[" | "]" | "@");
                    if !ok {
                        return Err(self.fail("malformed type arguments"));
                    }
                }
            }
            self.bump();
        }
        if depth < 0 {
            // `>>` closed an enclosing argument list as well; not reachable
            // because the outermost call consumes the whole list.
            return Err(self.fail("unbalanced type arguments"));
        }
        Ok(())
    }

    /// Parses a type and returns its raw (generics-erased) name.
    fn parse_type(&mut self) -> PResult<String> {
        let tok = self.peek().clone();
        let mut name = if tok.kind == TokenKind::Keyword && PRIMITIVES.contains(&tok.text.as_str()) {
            self.bump();
            tok.text
        } else if tok.kind == TokenKind::Ident {
            self.bump();
            let mut name = tok.text;
            loop {
                if self.at("<") {
                    self.skip_type_args()?;
                }
                if self.at(".") && self.peek_at(1).kind == TokenKind::Ident {
                    self.bump();
                    name.push('.');
                    name.push_str(&self.bump().text);
                } else {
                    break;
                }
            }
            name
        } else {
            return Err(self.fail("expected type"));
        };
        while self.at("[") && self.peek_at(1).is("]") {
            self.bump();
            self.bump();
            name.push_str("[]");
        }
        Ok(name)
    }

    /// Speculatively parses `Type Ident` as the head of a local declaration.
    fn local_decl_ahead(&mut self) -> bool {
        let save = self.pos;
        let ok = (|| -> PResult<bool> {
            self.modifiers()?;
            self.parse_type()?;
            if self.peek().kind != TokenKind::Ident {
                return Ok(false);
            }
            self.bump();
            Ok(["=", ";", ",", "[", ":"].iter().any(|t| self.at(t)))
        })()
        .unwrap_or(false);
        self.pos = save;
        ok
    }

    // ---- statements -----------------------------------------------------

    fn block(&mut self) -> PResult<AstNode> {
        let start = self.line();
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.at("}") {
            if self.at_eof() {
                return Err(self.fail("expected `}`"));
            }
            stmts.push(self.block_statement()?);
        }
        self.expect("}")?;
        Ok(self.node(NodeKind::Block, start).with_children(stmts))
    }

    fn block_statement(&mut self) -> PResult<AstNode> {
        if self.at("class") || self.at("interface") || self.at("enum") || self.at("abstract") {
            return Err(self.fail("local type declarations are not supported"));
        }
        if self.local_decl_ahead() {
            let decl = self.local_var_decl()?;
            self.expect(";")?;
            return Ok(decl);
        }
        self.statement()
    }

    fn local_var_decl(&mut self) -> PResult<AstNode> {
        let start = self.line();
        let mods = self.modifiers()?;
        let ty = self.parse_type()?;
        let name = self.ident()?;
        let decls = self.declarators_after_name(name)?;
        let mut d = self.node(NodeKind::LocalVarDecl, start).with_type(ty).with_children(decls);
        d.modifiers = mods;
        Ok(d)
    }

    fn statement(&mut self) -> PResult<AstNode> {
        let start = self.line();
        let tok = self.peek().clone();
        if tok.kind == TokenKind::Ident && self.peek_at(1).is(":") {
            return Err(self.fail("labeled statements are not supported"));
        }
        match tok.text.as_str() {
            "{" if tok.kind == TokenKind::Op => self.block(),
            ";" if tok.kind == TokenKind::Op => {
                self.bump();
                Ok(self.node(NodeKind::Empty, start))
            }
            "if" if tok.kind == TokenKind::Keyword => {
                self.bump();
                let cond = self.paren_expr()?;
                let then = self.statement()?;
                let mut children = vec![cond, then];
                if self.eat("else") {
                    children.push(self.statement()?);
                }
                Ok(self.node(NodeKind::If, start).with_children(children))
            }
            "while" if tok.kind == TokenKind::Keyword => {
                self.bump();
                let cond = self.paren_expr()?;
                let body = self.statement()?;
                Ok(self.node(NodeKind::While, start).with_children(vec![cond, body]))
            }
            "do" if tok.kind == TokenKind::Keyword => {
                self.bump();
                let body = self.statement()?;
                self.expect("while")?;
                let cond = self.paren_expr()?;
                self.expect(";")?;
                Ok(self.node(NodeKind::DoWhile, start).with_children(vec![body, cond]))
            }
            "for" if tok.kind == TokenKind::Keyword => self.for_statement(),
            "switch" if tok.kind == TokenKind::Keyword => self.switch_statement(),
            "try" if tok.kind == TokenKind::Keyword => self.try_statement(),
            "return" if tok.kind == TokenKind::Keyword => {
                self.bump();
                let mut children = Vec::new();
                if !self.at(";") {
                    children.push(self.expr()?);
                }
                self.expect(";")?;
                Ok(self.node(NodeKind::Return, start).with_children(children))
            }
            "throw" if tok.kind == TokenKind::Keyword => {
                self.bump();
                let e = self.expr()?;
                self.expect(";")?;
                Ok(self.node(NodeKind::Throw, start).with_children(vec![e]))
            }
            "break" | "continue" if tok.kind == TokenKind::Keyword => {
                self.bump();
                if !self.at(";") {
                    return Err(self.fail("labeled jumps are not supported"));
                }
                self.bump();
                let kind = if tok.text == "break" { NodeKind::Break } else { NodeKind::Continue };
                Ok(self.node(kind, start))
            }
            "synchronized" if tok.kind == TokenKind::Keyword => {
                self.bump();
                let lock = self.paren_expr()?;
                let body = self.block()?;
                Ok(self.node(NodeKind::Synchronized, start).with_children(vec![lock, body]))
            }
            "assert" if tok.kind == TokenKind::Keyword => {
                self.bump();
                let mut children = vec![self.expr()?];
                if self.eat(":") {
                    children.push(self.expr()?);
                }
                self.expect(";")?;
                Ok(self.node(NodeKind::Assert, start).with_children(children))
            }
            "else" | "case" | "default" | "catch" | "finally" if tok.kind == TokenKind::Keyword => {
                Err(self.fail("unexpected keyword"))
            }
            _ => {
                let e = self.expr()?;
                self.expect(";")?;
                Ok(self.node(NodeKind::ExprStatement, start).with_children(vec![e]))
            }
        }
    }

    fn paren_expr(&mut self) -> PResult<AstNode> {
        self.expect("(")?;
        let e = self.expr()?;
        self.expect(")")?;
        Ok(e)
    }

    fn for_statement(&mut self) -> PResult<AstNode> {
        let start = self.line();
        self.expect("for")?;
        self.expect("(")?;
        let init_start = self.line();
        if self.local_decl_ahead() {
            let var = self.local_var_decl()?;
            if self.eat(":") {
                let iter = self.expr()?;
                self.expect(")")?;
                let body = self.statement()?;
                return Ok(self.node(NodeKind::ForEach, start).with_children(vec![var, iter, body]));
            }
            let init = self.node(NodeKind::ForInit, init_start).with_children(vec![var]);
            return self.for_rest(start, init);
        }
        let mut inits = Vec::new();
        if !self.at(";") {
            loop {
                let s = self.line();
                let e = self.expr()?;
                inits.push(self.node(NodeKind::ExprStatement, s).with_children(vec![e]));
                if !self.eat(",") {
                    break;
                }
            }
        }
        let init = AstNode::new(NodeKind::ForInit, Span::new(init_start, self.prev_line().max(init_start))).with_children(inits);
        self.for_rest(start, init)
    }

    fn for_rest(&mut self, start: u32, init: AstNode) -> PResult<AstNode> {
        self.expect(";")?;
        let cond_start = self.line();
        let mut cond = Vec::new();
        if !self.at(";") {
            cond.push(self.expr()?);
        }
        let cond = AstNode::new(NodeKind::ForCond, Span::new(cond_start, self.prev_line().max(cond_start))).with_children(cond);
        self.expect(";")?;
        let upd_start = self.line();
        let mut updates = Vec::new();
        if !self.at(")") {
            loop {
                let s = self.line();
                let e = self.expr()?;
                updates.push(self.node(NodeKind::ExprStatement, s).with_children(vec![e]));
                if !self.eat(",") {
                    break;
                }
            }
        }
        let update = AstNode::new(NodeKind::ForUpdate, Span::new(upd_start, self.prev_line().max(upd_start))).with_children(updates);
        self.expect(")")?;
        let body = self.statement()?;
        Ok(self.node(NodeKind::For, start).with_children(vec![init, cond, update, body]))
    }

    fn switch_statement(&mut self) -> PResult<AstNode> {
        let start = self.line();
        self.expect("switch")?;
        let selector = self.paren_expr()?;
        self.expect("{")?;
        let mut children = vec![selector];
        while !self.eat("}") {
            let case_start = self.line();
            let mut is_default = false;
            let mut case = if self.eat("case") {
                let label = self.expr()?;
                if self.at(",") || self.at("->") {
                    return Err(self.fail("multi-label and arrow cases are not supported"));
                }
                self.expect(":")?;
                vec![label]
            } else if self.eat("default") {
                is_default = true;
                if self.at("->") {
                    return Err(self.fail("arrow cases are not supported"));
                }
                self.expect(":")?;
                Vec::new()
            } else {
                return Err(self.fail("expected `case` or `default`"));
            };
            let kind = if is_default { NodeKind::Default } else { NodeKind::Case };
            while !self.at("case") && !self.at("default") && !self.at("}") {
                if self.at_eof() {
                    return Err(self.fail("expected `}`"));
                }
                case.push(self.block_statement()?);
            }
            children.push(self.node(kind, case_start).with_children(case));
        }
        Ok(self.node(NodeKind::Switch, start).with_children(children))
    }

    fn try_statement(&mut self) -> PResult<AstNode> {
        let start = self.line();
        self.expect("try")?;
        let mut children = Vec::new();
        if self.at("(") {
            let rs = self.line();
            self.bump();
            let mut resources = Vec::new();
            while !self.at(")") {
                if self.local_decl_ahead() {
                    resources.push(self.local_var_decl()?);
                } else {
                    let s = self.line();
                    let e = self.expr()?;
                    resources.push(self.node(NodeKind::ExprStatement, s).with_children(vec![e]));
                }
                if !self.eat(";") {
                    break;
                }
            }
            self.expect(")")?;
            children.push(self.node(NodeKind::Resources, rs).with_children(resources));
        }
        children.push(self.block()?);
        let mut handlers = 0;
        while self.at("catch") {
            let cs = self.line();
            self.bump();
            self.expect("(")?;
            self.modifiers()?;
            let mut types = vec![self.parse_type()?];
            while self.eat("|") {
                types.push(self.parse_type()?);
            }
            let name = self.ident()?;
            self.expect(")")?;
            let body = self.block()?;
            children.push(self.node(NodeKind::Catch, cs).with_text(name).with_type(types.join("|")).with_children(vec![body]));
            handlers += 1;
        }
        if self.at("finally") {
            let fs = self.line();
            self.bump();
            let body = self.block()?;
            children.push(self.node(NodeKind::Finally, fs).with_children(vec![body]));
            handlers += 1;
        }
        if handlers == 0 && children[0].kind != NodeKind::Resources {
            return Err(self.fail("expected `catch` or `finally`"));
        }
        Ok(self.node(NodeKind::Try, start).with_children(children))
    }

    // ---- expressions ----------------------------------------------------

    fn expr(&mut self) -> PResult<AstNode> {
        let lhs = self.conditional()?;
        let tok = self.peek().clone();
        if tok.kind == TokenKind::Op && ASSIGN_OPS.contains(&tok.text.as_str()) {
            if !matches!(lhs.kind, NodeKind::Identifier | NodeKind::FieldAccess | NodeKind::ArrayAccess) {
                return Err(self.fail("invalid assignment target"));
            }
            self.bump();
            let rhs = self.expr()?;
            let start = lhs.span.start_line;
            return Ok(self.node(NodeKind::Assign, start).with_text(tok.text).with_children(vec![lhs, rhs]));
        }
        Ok(lhs)
    }

    fn conditional(&mut self) -> PResult<AstNode> {
        let cond = self.binary(1)?;
        if !self.eat("?") {
            return Ok(cond);
        }
        let a = self.expr()?;
        self.expect(":")?;
        let b = self.conditional()?;
        let start = cond.span.start_line;
        Ok(self.node(NodeKind::Conditional, start).with_children(vec![cond, a, b]))
    }

    fn binary(&mut self, min_prec: u8) -> PResult<AstNode> {
        let mut lhs = self.unary()?;
        loop {
            let tok = self.peek().clone();
            if !matches!(tok.kind, TokenKind::Op | TokenKind::Keyword) {
                break;
            }
            let Some(prec) = binary_precedence(&tok.text) else { break };
            if prec < min_prec {
                break;
            }
            self.bump();
            let start = lhs.span.start_line;
            if tok.text == "instanceof" {
                self.modifiers()?;
                let ty = self.parse_type()?;
                // Pattern binding (`x instanceof Foo f`) is accepted and dropped.
                if self.peek().kind == TokenKind::Ident {
                    self.bump();
                }
                lhs = self.node(NodeKind::InstanceOf, start).with_type(ty).with_children(vec![lhs]);
                continue;
            }
            let rhs = self.binary(prec + 1)?;
            lhs = self.node(NodeKind::BinaryOp, start).with_text(tok.text).with_children(vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<AstNode> {
        let start = self.line();
        let tok = self.peek().clone();
        if tok.kind == TokenKind::Op && matches!(tok.text.as_str(), "+" | "-" | "!" | "~" | "++" | "--") {
            self.bump();
            let operand = self.unary()?;
            return Ok(self.node(NodeKind::UnaryOp, start).with_text(tok.text).with_children(vec![operand]));
        }
        if tok.is("(") && !self.lambda_ahead() {
            if let Some(ty) = self.cast_ahead() {
                let operand = if self.lambda_ahead() { self.lambda()? } else { self.unary()? };
                return Ok(self.node(NodeKind::Cast, start).with_type(ty).with_children(vec![operand]));
            }
        }
        self.postfix()
    }

    /// If a cast `(Type)` starts here, consumes it and returns the type.
    fn cast_ahead(&mut self) -> Option<String> {
        let save = self.pos;
        self.bump();
        let primitive = PRIMITIVES.contains(&self.peek().text.as_str()) && self.peek().kind == TokenKind::Keyword;
        let ty = self.parse_type().ok();
        if let Some(ty) = ty {
            let mut ok = self.eat(")");
            if ok && !primitive {
                let next = self.peek();
                ok = match next.kind {
                    TokenKind::Ident | TokenKind::IntLit | TokenKind::FloatLit | TokenKind::CharLit | TokenKind::StringLit => true,
                    TokenKind::Keyword => matches!(next.text.as_str(), "this" | "super" | "new" | "true" | "false" | "null"),
                    TokenKind::Op => matches!(next.text.as_str(), "(" | "!" | "~"),
                    TokenKind::Eof => false,
                };
            }
            if ok {
                return Some(ty);
            }
        }
        self.pos = save;
        None
    }

    fn lambda_ahead(&self) -> bool {
        let tok = self.peek();
        if tok.kind == TokenKind::Ident {
            return self.peek_at(1).is("->");
        }
        if !tok.is("(") {
            return false;
        }
        let mut depth = 0usize;
        let mut i = self.pos;
        while i < self.toks.len() {
            let t = &self.toks[i];
            if t.is("(") {
                depth += 1;
            } else if t.is(")") {
                depth -= 1;
                if depth == 0 {
                    return self.toks.get(i + 1).is_some_and(|n| n.is("->"));
                }
            } else if t.kind == TokenKind::Eof || t.is(";") || t.is("{") {
                return false;
            }
            i += 1;
        }
        false
    }

    fn lambda(&mut self) -> PResult<AstNode> {
        let start = self.line();
        let first = self.pos;
        if self.at("(") {
            self.skip_balanced("(", ")")?;
        } else {
            self.ident()?;
        }
        self.expect("->")?;
        if self.at("{") {
            self.block()?;
        } else {
            self.expr()?;
        }
        let text = self.source_since(first);
        Ok(self.node(NodeKind::Lambda, start).with_text(text))
    }

    fn source_since(&self, first: usize) -> String {
        self.toks[first..self.pos].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
    }

    fn arguments(&mut self) -> PResult<AstNode> {
        let start = self.line();
        self.expect("(")?;
        let mut args = Vec::new();
        if !self.at(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        Ok(self.node(NodeKind::Arguments, start).with_children(args))
    }

    fn postfix(&mut self) -> PResult<AstNode> {
        let mut e = self.primary()?;
        loop {
            let start = e.span.start_line;
            if self.at(".") {
                self.bump();
                if self.eat("class") {
                    let ty = qualified_name(&e).ok_or_else(|| self.fail("invalid class literal"))?;
                    e = self.node(NodeKind::ClassLiteral, start).with_type(ty);
                    continue;
                }
                if self.at("new") || self.at("<") {
                    return Err(self.fail("qualified creation and explicit type arguments are not supported"));
                }
                let name = if self.at("this") || self.at("super") { self.bump().text } else { self.ident()? };
                if self.at("(") {
                    let args = self.arguments()?;
                    e = self.node(NodeKind::Call, start).with_text(name).with_children(vec![e, args]);
                } else {
                    e = self.node(NodeKind::FieldAccess, start).with_text(name).with_children(vec![e]);
                }
            } else if self.at("[") {
                self.bump();
                let idx = self.expr()?;
                self.expect("]")?;
                e = self.node(NodeKind::ArrayAccess, start).with_children(vec![e, idx]);
            } else if self.at("++") || self.at("--") {
                let op = self.bump().text;
                let mut u = self.node(NodeKind::UnaryOp, start).with_text(op).with_children(vec![e]);
                u.modifiers.insert(Modifiers::POSTFIX);
                e = u;
            } else if self.at("::") {
                self.bump();
                let target = if self.at("new") { self.bump().text } else { self.ident()? };
                let recv = qualified_name(&e).unwrap_or_else(|| "expr".into());
                e = self.node(NodeKind::MethodRef, start).with_text(format!("{recv} :: {target}"));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<AstNode> {
        let start = self.line();
        let tok = self.peek().clone();
        match tok.kind {
            TokenKind::IntLit | TokenKind::FloatLit | TokenKind::CharLit | TokenKind::StringLit => {
                self.bump();
                Ok(self.node(NodeKind::Literal, start).with_text(tok.text))
            }
            TokenKind::Ident => {
                if self.lambda_ahead() {
                    return self.lambda();
                }
                self.bump();
                if self.at("(") {
                    let args = self.arguments()?;
                    return Ok(self.node(NodeKind::Call, start).with_text(tok.text).with_children(vec![args]));
                }
                // Array class literal / method reference on an array type.
                if self.at("[") && self.peek_at(1).is("]") {
                    let mut ty = tok.text;
                    while self.at("[") && self.peek_at(1).is("]") {
                        self.bump();
                        self.bump();
                        ty.push_str("[]");
                    }
                    if self.eat(".") {
                        self.expect("class")?;
                        return Ok(self.node(NodeKind::ClassLiteral, start).with_type(ty));
                    }
                    return Err(self.fail("expected `.class`"));
                }
                Ok(self.node(NodeKind::Identifier, start).with_text(tok.text))
            }
            TokenKind::Keyword => match tok.text.as_str() {
                "true" | "false" | "null" => {
                    self.bump();
                    Ok(self.node(NodeKind::Literal, start).with_text(tok.text))
                }
                "this" | "super" => {
                    self.bump();
                    if self.at("(") {
                        let args = self.arguments()?;
                        return Ok(self.node(NodeKind::Call, start).with_text(tok.text).with_children(vec![args]));
                    }
                    Ok(self.node(NodeKind::Identifier, start).with_text(tok.text))
                }
                "new" => self.creator(),
                p if PRIMITIVES.contains(&p) => {
                    let ty = self.parse_type()?;
                    self.expect(".")?;
                    self.expect("class")?;
                    Ok(self.node(NodeKind::ClassLiteral, start).with_type(ty))
                }
                "switch" => Err(self.fail("switch expressions are not supported")),
                _ => Err(self.fail("expected expression")),
            },
            TokenKind::Op => match tok.text.as_str() {
                "(" => {
                    if self.lambda_ahead() {
                        return self.lambda();
                    }
                    self.bump();
                    let e = self.expr()?;
                    self.expect(")")?;
                    Ok(e)
                }
                "{" => self.array_init(),
                _ => Err(self.fail("expected expression")),
            },
            TokenKind::Eof => Err(self.fail("expected expression")),
        }
    }

    fn creator(&mut self) -> PResult<AstNode> {
        let start = self.line();
        self.expect("new")?;
        let tok = self.peek().clone();
        let mut ty = if tok.kind == TokenKind::Keyword && PRIMITIVES.contains(&tok.text.as_str()) {
            self.bump();
            tok.text
        } else {
            let mut name = self.ident()?;
            loop {
                if self.at("<") {
                    self.skip_type_args()?;
                }
                if self.at(".") && self.peek_at(1).kind == TokenKind::Ident {
                    self.bump();
                    name.push('.');
                    name.push_str(&self.bump().text);
                } else {
                    break;
                }
            }
            name
        };
        if self.at("[") {
            let mut children = Vec::new();
            while self.eat("[") {
                if self.eat("]") {
                    ty.push_str("[]");
                    continue;
                }
                children.push(self.expr()?);
                self.expect("]")?;
                ty.push_str("[]");
            }
            if self.at("{") {
                children.push(self.array_init()?);
            }
            return Ok(self.node(NodeKind::NewArray, start).with_type(ty).with_children(children));
        }
        let args = self.arguments()?;
        let mut children = vec![args];
        if self.at("{") {
            let body_start = self.line();
            let members = self.class_body("")?;
            let mut anon = self.node(NodeKind::ClassDecl, body_start).with_text("").with_children(members);
            anon.modifiers.insert(Modifiers::ANONYMOUS);
            anon.type_name = Some(ty.clone());
            children.push(anon);
        }
        Ok(self.node(NodeKind::New, start).with_type(ty).with_children(children))
    }
}

/// Dotted name for an identifier / field-access chain (`a.b.C`).
fn qualified_name(e: &AstNode) -> Option<String> {
    match e.kind {
        NodeKind::Identifier => e.text.clone(),
        NodeKind::FieldAccess => {
            let base = qualified_name(e.children.first()?)?;
            Some(format!("{base}.{}", e.text()))
        }
        _ => None,
    }
}
