//! Recursive-descent parser for Python 3 function-level code.
//!
//! The grammar covers ordinary statement and expression syntax (including
//! `try`, `with`, `class` and `async` forms, which later analyses reject as
//! unsupported). Structural pattern matching and type-parameter syntax are
//! not recognized and surface as syntax errors.

use super::ast::*;
use super::lexer::{self, is_keyword, Span, TokKind, Token};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at {line}:{col}: {message}")]
pub struct SyntaxError {
    /// Byte offset into the source.
    pub pos: usize,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn at(src: &str, pos: usize, message: impl Into<String>) -> Self {
        let pos = pos.min(src.len());
        let before = &src[..pos];
        let line = before.matches('\n').count() + 1;
        let col = before.rfind('\n').map_or(pos, |i| pos - i - 1) + 1;
        SyntaxError { pos, line, col, message: message.into() }
    }
}

type PResult<T> = Result<T, SyntaxError>;

pub fn parse_module(src: &str) -> PResult<Module> {
    let toks = lexer::tokenize(src).map_err(|e| SyntaxError::at(src, e.pos, e.message))?;
    let toks: Vec<Token> = toks.into_iter().filter(|t| t.kind != TokKind::Comment).collect();
    let mut p = Parser { src, toks, pos: 0, last_end: 0 };
    let mut body = Vec::new();
    while !p.at_kind(TokKind::EndMarker) {
        if p.at_kind(TokKind::Newline) {
            p.advance();
            continue;
        }
        body.extend(p.statement()?);
    }
    Ok(Module { body })
}

/// Parses a standalone expression (used for f-string replacement fields).
fn parse_fragment(src: &str, start: usize, end: usize) -> PResult<Expr> {
    let sub = &src[start..end];
    let mut toks: Vec<Token> = lexer::lexical_tokens(sub)
        .map_err(|e| SyntaxError::at(src, start + e.pos, e.message))?
        .into_iter()
        .filter(|t| t.kind != TokKind::Comment)
        .map(|t| Token { kind: t.kind, span: Span::new(t.span.start + start, t.span.end + start) })
        .collect();
    toks.push(Token { kind: TokKind::EndMarker, span: Span::new(end, end) });
    let mut p = Parser { src, toks, pos: 0, last_end: start };
    let e = p.testlist_star_expr()?;
    if !p.at_kind(TokKind::EndMarker) {
        return Err(p.error("unexpected token in f-string expression"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    last_end: usize,
}

const AUG_OPS: &[&str] = &["+=", "-=", "*=", "/=", "//=", "%=", "**=", "<<=", ">>=", "&=", "|=", "^=", "@="];

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_n(&self, n: usize) -> &Token {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)]
    }

    fn text(&self, t: &Token) -> &'a str {
        &self.src[t.span.start..t.span.end]
    }

    fn at_kind(&self, k: TokKind) -> bool {
        self.peek().kind == k
    }

    fn at_op(&self, op: &str) -> bool {
        let t = self.peek();
        t.kind == TokKind::Op && self.text(t) == op
    }

    fn at_kw(&self, kw: &str) -> bool {
        let t = self.peek();
        t.kind == TokKind::Name && self.text(t) == kw
    }

    fn nth_is_kw(&self, n: usize, kw: &str) -> bool {
        let t = self.peek_n(n);
        t.kind == TokKind::Name && self.text(t) == kw
    }

    fn advance(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        if !matches!(t.kind, TokKind::Newline | TokKind::Indent | TokKind::Dedent | TokKind::EndMarker) {
            self.last_end = t.span.end;
        }
        t
    }

    fn error(&self, msg: &str) -> SyntaxError {
        let t = self.peek();
        let found = match t.kind {
            TokKind::Newline => "newline".to_string(),
            TokKind::Indent => "indent".to_string(),
            TokKind::Dedent => "dedent".to_string(),
            TokKind::EndMarker => "end of input".to_string(),
            _ => format!("{:?}", self.text(t)),
        };
        SyntaxError::at(self.src, t.span.start, format!("{msg} (found {found})"))
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<Token> {
        if self.at_op(op) {
            Ok(self.advance())
        } else {
            Err(self.error(&format!("expected '{op}'")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Token> {
        if self.at_kw(kw) {
            Ok(self.advance())
        } else {
            Err(self.error(&format!("expected '{kw}'")))
        }
    }

    fn expect_kind(&mut self, k: TokKind, what: &str) -> PResult<Token> {
        if self.at_kind(k) {
            Ok(self.advance())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn name(&mut self) -> PResult<Name> {
        let t = self.peek().clone();
        if t.kind == TokKind::Name && !is_keyword(self.text(&t)) {
            self.advance();
            Ok(Name { id: self.text(&t).to_string(), span: t.span })
        } else {
            Err(self.error("expected identifier"))
        }
    }

    // ---- statements -------------------------------------------------------

    fn statement(&mut self) -> PResult<Vec<Stmt>> {
        if self.at_op("@") {
            return Ok(vec![self.decorated()?]);
        }
        let t = self.peek().clone();
        if t.kind == TokKind::Indent {
            return Err(self.error("unexpected indent"));
        }
        if t.kind == TokKind::Name {
            match self.text(&t) {
                "if" => return Ok(vec![self.if_stmt(false)?]),
                "while" => return Ok(vec![self.while_stmt()?]),
                "for" => return Ok(vec![self.for_stmt(t.span.start, false)?]),
                "def" => return Ok(vec![self.funcdef(t.span.start, Vec::new(), false)?]),
                "class" => return Ok(vec![self.classdef(t.span.start, Vec::new())?]),
                "try" => return Ok(vec![self.try_stmt()?]),
                "with" => return Ok(vec![self.with_stmt(t.span.start, false)?]),
                "async" => {
                    self.advance();
                    if self.at_kw("def") {
                        return Ok(vec![self.funcdef(t.span.start, Vec::new(), true)?]);
                    } else if self.at_kw("for") {
                        return Ok(vec![self.for_stmt(t.span.start, true)?]);
                    } else if self.at_kw("with") {
                        return Ok(vec![self.with_stmt(t.span.start, true)?]);
                    }
                    return Err(self.error("expected def, for or with after async"));
                }
                _ => {}
            }
        }
        self.simple_line()
    }

    fn decorated(&mut self) -> PResult<Stmt> {
        let start = self.peek().span.start;
        let mut decorators = Vec::new();
        while self.eat_op("@") {
            decorators.push(self.namedexpr_test()?);
            self.expect_kind(TokKind::Newline, "newline after decorator")?;
        }
        if self.at_kw("def") {
            self.funcdef(start, decorators, false)
        } else if self.at_kw("class") {
            self.classdef(start, decorators)
        } else if self.at_kw("async") && self.nth_is_kw(1, "def") {
            self.advance();
            self.funcdef(start, decorators, true)
        } else {
            Err(self.error("expected def or class after decorator"))
        }
    }

    /// A logical line of `;`-separated simple statements.
    fn simple_line(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = vec![self.small_stmt()?];
        while self.eat_op(";") {
            if self.at_kind(TokKind::Newline) {
                break;
            }
            out.push(self.small_stmt()?);
        }
        self.expect_kind(TokKind::Newline, "end of statement")?;
        Ok(out)
    }

    fn suite(&mut self) -> PResult<Suite> {
        self.expect_op(":")?;
        if self.at_kind(TokKind::Newline) {
            self.advance();
            self.expect_kind(TokKind::Indent, "an indented block")?;
            let mut stmts = Vec::new();
            while !self.at_kind(TokKind::Dedent) && !self.at_kind(TokKind::EndMarker) {
                if self.at_kind(TokKind::Newline) {
                    self.advance();
                    continue;
                }
                stmts.extend(self.statement()?);
            }
            self.expect_kind(TokKind::Dedent, "dedent")?;
            Ok(Suite { stmts, inline: false })
        } else {
            Ok(Suite { stmts: self.simple_line()?, inline: true })
        }
    }

    fn if_stmt(&mut self, is_elif: bool) -> PResult<Stmt> {
        let start = self.advance().span.start;
        let test = self.namedexpr_test()?;
        let body = self.suite()?;
        let mut end = body.span().end;
        let mut else_kw = None;
        let orelse = if self.at_kw("elif") {
            let nested = self.if_stmt(true)?;
            end = nested.span.end;
            Some(Suite { stmts: vec![nested], inline: false })
        } else if self.at_kw("else") {
            else_kw = Some(self.advance().span);
            let s = self.suite()?;
            end = s.span().end;
            Some(s)
        } else {
            None
        };
        Ok(Stmt { kind: StmtKind::If { test, body, orelse, is_elif, else_kw }, span: Span::new(start, end) })
    }

    fn else_suite(&mut self) -> PResult<Option<Suite>> {
        if self.eat_kw("else") {
            Ok(Some(self.suite()?))
        } else {
            Ok(None)
        }
    }

    fn while_stmt(&mut self) -> PResult<Stmt> {
        let start = self.advance().span.start;
        let test = self.namedexpr_test()?;
        let body = self.suite()?;
        let orelse = self.else_suite()?;
        let end = orelse.as_ref().unwrap_or(&body).span().end;
        Ok(Stmt { kind: StmtKind::While { test, body, orelse }, span: Span::new(start, end) })
    }

    fn for_stmt(&mut self, start: usize, is_async: bool) -> PResult<Stmt> {
        self.expect_kw("for")?;
        let target = self.exprlist()?;
        self.expect_kw("in")?;
        let iter = self.testlist_star_expr()?;
        let body = self.suite()?;
        let orelse = self.else_suite()?;
        let end = orelse.as_ref().unwrap_or(&body).span().end;
        Ok(Stmt { kind: StmtKind::For { target, iter, body, orelse, is_async }, span: Span::new(start, end) })
    }

    fn funcdef(&mut self, start: usize, decorators: Vec<Expr>, is_async: bool) -> PResult<Stmt> {
        self.expect_kw("def")?;
        let name = self.name()?;
        self.expect_op("(")?;
        let params = self.params(")", true)?;
        self.expect_op(")")?;
        let returns = if self.eat_op("->") { Some(self.test()?) } else { None };
        let body = self.suite()?;
        let end = body.span().end;
        Ok(Stmt {
            kind: StmtKind::FunctionDef { name, params, returns, body, decorators, is_async },
            span: Span::new(start, end),
        })
    }

    fn classdef(&mut self, start: usize, decorators: Vec<Expr>) -> PResult<Stmt> {
        self.expect_kw("class")?;
        let name = self.name()?;
        let (mut bases, mut keywords) = (Vec::new(), Vec::new());
        if self.eat_op("(") {
            let (a, k) = self.arglist()?;
            bases = a;
            keywords = k;
            self.expect_op(")")?;
        }
        let body = self.suite()?;
        let end = body.span().end;
        Ok(Stmt { kind: StmtKind::ClassDef { name, bases, keywords, body, decorators }, span: Span::new(start, end) })
    }

    fn try_stmt(&mut self) -> PResult<Stmt> {
        let start = self.advance().span.start;
        let body = self.suite()?;
        let mut end = body.span().end;
        let mut handlers = Vec::new();
        while self.eat_kw("except") {
            let mut typ = None;
            let mut name = None;
            if !self.at_op(":") {
                typ = Some(self.test()?);
                if self.eat_kw("as") {
                    name = Some(self.name()?);
                }
            }
            let b = self.suite()?;
            end = b.span().end;
            handlers.push(ExceptHandler { typ, name, body: b });
        }
        let orelse = if !handlers.is_empty() { self.else_suite()? } else { None };
        if let Some(o) = &orelse {
            end = o.span().end;
        }
        let finalbody = if self.eat_kw("finally") { Some(self.suite()?) } else { None };
        if let Some(f) = &finalbody {
            end = f.span().end;
        }
        if handlers.is_empty() && finalbody.is_none() {
            return Err(self.error("expected 'except' or 'finally' block"));
        }
        Ok(Stmt { kind: StmtKind::Try { body, handlers, orelse, finalbody }, span: Span::new(start, end) })
    }

    fn with_stmt(&mut self, start: usize, is_async: bool) -> PResult<Stmt> {
        self.expect_kw("with")?;
        let mut items = Vec::new();
        loop {
            let context = self.test()?;
            let target = if self.eat_kw("as") { Some(self.expr()?) } else { None };
            items.push(WithItem { context, target });
            if !self.eat_op(",") {
                break;
            }
        }
        let body = self.suite()?;
        let end = body.span().end;
        Ok(Stmt { kind: StmtKind::With { items, body, is_async }, span: Span::new(start, end) })
    }

    fn small_stmt(&mut self) -> PResult<Stmt> {
        let start = self.peek().span.start;
        let t = self.peek().clone();
        let kind = if t.kind == TokKind::Name {
            match self.text(&t) {
                "pass" => {
                    self.advance();
                    StmtKind::Pass
                }
                "break" => {
                    self.advance();
                    StmtKind::Break
                }
                "continue" => {
                    self.advance();
                    StmtKind::Continue
                }
                "return" => {
                    self.advance();
                    if self.at_stmt_end() {
                        StmtKind::Return(None)
                    } else {
                        StmtKind::Return(Some(self.testlist_star_expr()?))
                    }
                }
                "raise" => {
                    self.advance();
                    if self.at_stmt_end() {
                        StmtKind::Raise { exc: None, cause: None }
                    } else {
                        let exc = self.test()?;
                        let cause = if self.eat_kw("from") { Some(self.test()?) } else { None };
                        StmtKind::Raise { exc: Some(exc), cause }
                    }
                }
                "global" | "nonlocal" => {
                    let is_global = self.text(&t) == "global";
                    self.advance();
                    let mut names = vec![self.name()?];
                    while self.eat_op(",") {
                        names.push(self.name()?);
                    }
                    if is_global {
                        StmtKind::Global(names)
                    } else {
                        StmtKind::Nonlocal(names)
                    }
                }
                "del" => {
                    self.advance();
                    let e = self.exprlist()?;
                    let targets = match e.kind {
                        ExprKind::Tuple(items) if !self.src[e.span.start..].starts_with('(') => items,
                        kind => vec![Expr { kind, span: e.span }],
                    };
                    StmtKind::Del(targets)
                }
                "assert" => {
                    self.advance();
                    let test = self.test()?;
                    let msg = if self.eat_op(",") { Some(self.test()?) } else { None };
                    StmtKind::Assert { test, msg }
                }
                "import" => {
                    self.advance();
                    let mut names = vec![self.dotted_as_name()?];
                    while self.eat_op(",") {
                        names.push(self.dotted_as_name()?);
                    }
                    StmtKind::Import(names)
                }
                "from" => self.import_from()?,
                _ => self.expr_stmt()?,
            }
        } else {
            self.expr_stmt()?
        };
        Ok(Stmt { kind, span: Span::new(start, self.last_end) })
    }

    fn at_stmt_end(&self) -> bool {
        self.at_kind(TokKind::Newline) || self.at_op(";") || self.at_kind(TokKind::EndMarker)
    }

    fn dotted_name(&mut self) -> PResult<(String, Span)> {
        let first = self.name()?;
        let mut s = first.id.clone();
        let mut span = first.span;
        while self.eat_op(".") {
            let n = self.name()?;
            s.push('.');
            s.push_str(&n.id);
            span = span.cover(n.span);
        }
        Ok((s, span))
    }

    fn dotted_as_name(&mut self) -> PResult<Alias> {
        let (name, mut span) = self.dotted_name()?;
        let asname = if self.eat_kw("as") { Some(self.name()?) } else { None };
        if let Some(a) = &asname {
            span = span.cover(a.span);
        }
        Ok(Alias { name, asname, span })
    }

    fn import_from(&mut self) -> PResult<StmtKind> {
        self.expect_kw("from")?;
        let mut level = 0;
        loop {
            if self.eat_op(".") {
                level += 1;
            } else if self.eat_op("...") {
                level += 3;
            } else {
                break;
            }
        }
        let module = if self.at_kw("import") { String::new() } else { self.dotted_name()?.0 };
        self.expect_kw("import")?;
        let mut names = Vec::new();
        if self.at_op("*") {
            let t = self.advance();
            names.push(Alias { name: "*".into(), asname: None, span: t.span });
        } else {
            let paren = self.eat_op("(");
            loop {
                let n = self.name()?;
                let asname = if self.eat_kw("as") { Some(self.name()?) } else { None };
                let span = asname.as_ref().map_or(n.span, |a| n.span.cover(a.span));
                names.push(Alias { name: n.id, asname, span });
                if !self.eat_op(",") {
                    break;
                }
                if paren && self.at_op(")") {
                    break;
                }
            }
            if paren {
                self.expect_op(")")?;
            }
        }
        Ok(StmtKind::ImportFrom { module, level, names })
    }

    fn expr_stmt(&mut self) -> PResult<StmtKind> {
        let first = self.testlist_star_expr()?;
        if self.peek().kind == TokKind::Op {
            let op = self.text(self.peek());
            if AUG_OPS.contains(&op) {
                self.advance();
                let bin = BinOp::from_symbol(&op[..op.len() - 1]).expect("augmented operator");
                let value = if self.at_kw("yield") { self.yield_expr()? } else { self.testlist_star_expr()? };
                check_target(self.src, &first, true)?;
                return Ok(StmtKind::AugAssign { target: first, op: bin, value });
            }
            if op == ":" {
                self.advance();
                let annotation = self.test()?;
                let value = if self.eat_op("=") { Some(self.testlist_star_expr()?) } else { None };
                check_target(self.src, &first, true)?;
                return Ok(StmtKind::AnnAssign { target: first, annotation, value });
            }
            if op == "=" {
                let mut chain = vec![first];
                while self.eat_op("=") {
                    let rhs = if self.at_kw("yield") { self.yield_expr()? } else { self.testlist_star_expr()? };
                    chain.push(rhs);
                }
                let value = chain.pop().unwrap();
                for t in &chain {
                    check_target(self.src, t, false)?;
                }
                return Ok(StmtKind::Assign { targets: chain, value });
            }
        }
        Ok(StmtKind::Expr(first))
    }

    // ---- parameters and arguments ------------------------------------------

    fn params(&mut self, close: &str, annotations: bool) -> PResult<Vec<Param>> {
        let mut out: Vec<Param> = Vec::new();
        let mut kind = ParamKind::Normal;
        while !self.at_op(close) {
            if self.eat_op("/") {
                for p in out.iter_mut() {
                    p.kind = ParamKind::PositionalOnly;
                }
            } else if self.eat_op("**") {
                let name = self.name()?;
                let annotation = if annotations && self.eat_op(":") { Some(self.test()?) } else { None };
                out.push(Param { name, kind: ParamKind::VarKeywords, default: None, annotation });
            } else if self.eat_op("*") {
                kind = ParamKind::KeywordOnly;
                if !self.at_op(",") && !self.at_op(close) {
                    let name = self.name()?;
                    let annotation = if annotations && self.eat_op(":") { Some(self.test()?) } else { None };
                    out.push(Param { name, kind: ParamKind::VarArgs, default: None, annotation });
                }
            } else {
                let name = self.name()?;
                let annotation = if annotations && self.eat_op(":") { Some(self.test()?) } else { None };
                let default = if self.eat_op("=") { Some(self.test()?) } else { None };
                out.push(Param { name, kind, default, annotation });
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(out)
    }

    fn arglist(&mut self) -> PResult<(Vec<Expr>, Vec<Keyword>)> {
        let mut args = Vec::new();
        let mut keywords = Vec::new();
        while !self.at_op(")") {
            if self.at_op("**") {
                self.advance();
                keywords.push(Keyword { arg: None, value: self.test()? });
            } else if self.at_op("*") {
                let st = self.advance().span.start;
                let v = self.test()?;
                args.push(Expr { span: Span::new(st, v.span.end), kind: ExprKind::Starred(Box::new(v)) });
            } else if self.peek().kind == TokKind::Name
                && self.peek_n(1).kind == TokKind::Op
                && self.text(self.peek_n(1)) == "="
            {
                let arg = self.name()?;
                self.advance();
                keywords.push(Keyword { arg: Some(arg), value: self.test()? });
            } else {
                let e = self.namedexpr_test()?;
                if self.at_kw("for") || (self.at_kw("async") && self.nth_is_kw(1, "for")) {
                    let generators = self.comp_for()?;
                    let span = Span::new(e.span.start, self.last_end);
                    args.push(Expr {
                        kind: ExprKind::Comp { kind: CompKind::Generator, elt: Box::new(e), value: None, generators },
                        span,
                    });
                } else {
                    args.push(e);
                }
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok((args, keywords))
    }

    // ---- expressions ---------------------------------------------------------

    /// `a, *b, c` style list; a bare comma builds a tuple.
    fn testlist_star_expr(&mut self) -> PResult<Expr> {
        let first = self.star_or_namedexpr()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let start = first.span.start;
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expr_end() {
                break;
            }
            items.push(self.star_or_namedexpr()?);
        }
        Ok(Expr { kind: ExprKind::Tuple(items), span: Span::new(start, self.last_end) })
    }

    fn at_expr_end(&self) -> bool {
        let t = self.peek();
        match t.kind {
            TokKind::Newline | TokKind::EndMarker | TokKind::Dedent | TokKind::Indent => true,
            TokKind::Op => matches!(self.text(t), ")" | "]" | "}" | "=" | ";" | ":") || AUG_OPS.contains(&self.text(t)),
            TokKind::Name => matches!(self.text(t), "in" | "for" | "if" | "async"),
            _ => false,
        }
    }

    fn star_or_namedexpr(&mut self) -> PResult<Expr> {
        if self.at_op("*") {
            let st = self.advance().span.start;
            let v = self.expr()?;
            return Ok(Expr { span: Span::new(st, v.span.end), kind: ExprKind::Starred(Box::new(v)) });
        }
        self.namedexpr_test()
    }

    /// Target list for `for` and `del`: bitwise-or level expressions.
    fn exprlist(&mut self) -> PResult<Expr> {
        let one = |p: &mut Self| -> PResult<Expr> {
            if p.at_op("*") {
                let st = p.advance().span.start;
                let v = p.expr()?;
                Ok(Expr { span: Span::new(st, v.span.end), kind: ExprKind::Starred(Box::new(v)) })
            } else {
                p.expr()
            }
        };
        let first = one(self)?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let start = first.span.start;
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expr_end() {
                break;
            }
            items.push(one(self)?);
        }
        Ok(Expr { kind: ExprKind::Tuple(items), span: Span::new(start, self.last_end) })
    }

    fn namedexpr_test(&mut self) -> PResult<Expr> {
        let e = self.test()?;
        if self.at_op(":=") {
            let ExprKind::Name(id) = &e.kind else {
                return Err(self.error("cannot use assignment expression with this target"));
            };
            self.advance();
            let value = self.test()?;
            let span = Span::new(e.span.start, value.span.end);
            return Ok(Expr {
                kind: ExprKind::NamedExpr { target: Name { id: id.clone(), span: e.span }, value: Box::new(value) },
                span,
            });
        }
        Ok(e)
    }

    fn test(&mut self) -> PResult<Expr> {
        if self.at_kw("lambda") {
            return self.lambda(true);
        }
        let body = self.or_test()?;
        if self.at_kw("if") {
            self.advance();
            let test = self.or_test()?;
            self.expect_kw("else")?;
            let orelse = self.test()?;
            let span = Span::new(body.span.start, orelse.span.end);
            return Ok(Expr {
                kind: ExprKind::IfExp { test: Box::new(test), body: Box::new(body), orelse: Box::new(orelse) },
                span,
            });
        }
        Ok(body)
    }

    fn test_nocond(&mut self) -> PResult<Expr> {
        if self.at_kw("lambda") {
            return self.lambda(false);
        }
        self.or_test()
    }

    fn lambda(&mut self, allow_cond: bool) -> PResult<Expr> {
        let start = self.advance().span.start;
        let params = self.params(":", false)?;
        self.expect_op(":")?;
        let body = if allow_cond { self.test()? } else { self.test_nocond()? };
        let span = Span::new(start, body.span.end);
        Ok(Expr { kind: ExprKind::Lambda { params, body: Box::new(body) }, span })
    }

    fn or_test(&mut self) -> PResult<Expr> {
        self.bool_chain("or", BoolOp::Or, Self::and_test)
    }

    fn and_test(&mut self) -> PResult<Expr> {
        self.bool_chain("and", BoolOp::And, Self::not_test)
    }

    fn bool_chain(&mut self, kw: &str, op: BoolOp, next: fn(&mut Self) -> PResult<Expr>) -> PResult<Expr> {
        let first = next(self)?;
        if !self.at_kw(kw) {
            return Ok(first);
        }
        let start = first.span.start;
        let mut values = vec![first];
        while self.eat_kw(kw) {
            values.push(next(self)?);
        }
        let end = values.last().unwrap().span.end;
        Ok(Expr { kind: ExprKind::BoolOp { op, values }, span: Span::new(start, end) })
    }

    fn not_test(&mut self) -> PResult<Expr> {
        if self.at_kw("not") {
            let st = self.advance().span.start;
            let operand = self.not_test()?;
            let span = Span::new(st, operand.span.end);
            return Ok(Expr { kind: ExprKind::UnaryOp { op: UnaryOp::Not, operand: Box::new(operand) }, span });
        }
        self.comparison()
    }

    fn comp_op(&mut self) -> Option<CmpOp> {
        let t = self.peek().clone();
        let s = self.text(&t);
        let op = match (t.kind, s) {
            (TokKind::Op, "==") => CmpOp::Eq,
            (TokKind::Op, "!=") => CmpOp::NotEq,
            (TokKind::Op, "<") => CmpOp::Lt,
            (TokKind::Op, "<=") => CmpOp::LtE,
            (TokKind::Op, ">") => CmpOp::Gt,
            (TokKind::Op, ">=") => CmpOp::GtE,
            (TokKind::Name, "in") => CmpOp::In,
            (TokKind::Name, "is") => {
                if self.nth_is_kw(1, "not") {
                    self.advance();
                    self.advance();
                    return Some(CmpOp::IsNot);
                }
                CmpOp::Is
            }
            (TokKind::Name, "not") if self.nth_is_kw(1, "in") => {
                self.advance();
                self.advance();
                return Some(CmpOp::NotIn);
            }
            _ => return None,
        };
        self.advance();
        Some(op)
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let left = self.expr()?;
        let mut ops = Vec::new();
        let mut comparators = Vec::new();
        while let Some(op) = self.comp_op() {
            ops.push(op);
            comparators.push(self.expr()?);
        }
        if ops.is_empty() {
            return Ok(left);
        }
        let span = Span::new(left.span.start, comparators.last().unwrap().span.end);
        Ok(Expr { kind: ExprKind::Compare { left: Box::new(left), ops, comparators }, span })
    }

    fn binary_level(&mut self, ops: &[&str], next: fn(&mut Self) -> PResult<Expr>) -> PResult<Expr> {
        let mut left = next(self)?;
        loop {
            let t = self.peek();
            if t.kind != TokKind::Op || !ops.contains(&self.text(t)) {
                break;
            }
            let op = BinOp::from_symbol(self.text(t)).unwrap();
            self.advance();
            let right = next(self)?;
            let span = Span::new(left.span.start, right.span.end);
            left = Expr { kind: ExprKind::BinOp { left: Box::new(left), op, right: Box::new(right) }, span };
        }
        Ok(left)
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary_level(&["|"], Self::xor_expr)
    }

    fn xor_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&["^"], Self::and_expr)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&["&"], Self::shift_expr)
    }

    fn shift_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&["<<", ">>"], Self::arith_expr)
    }

    fn arith_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&["+", "-"], Self::term)
    }

    fn term(&mut self) -> PResult<Expr> {
        self.binary_level(&["*", "/", "//", "%", "@"], Self::factor)
    }

    fn factor(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        if t.kind == TokKind::Op {
            let op = match self.text(&t) {
                "-" => Some(UnaryOp::Neg),
                "+" => Some(UnaryOp::Pos),
                "~" => Some(UnaryOp::Invert),
                _ => None,
            };
            if let Some(op) = op {
                self.advance();
                let operand = self.factor()?;
                let span = Span::new(t.span.start, operand.span.end);
                return Ok(Expr { kind: ExprKind::UnaryOp { op, operand: Box::new(operand) }, span });
            }
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = if self.at_kw("await") {
            let st = self.advance().span.start;
            let v = self.primary()?;
            Expr { span: Span::new(st, v.span.end), kind: ExprKind::Await(Box::new(v)) }
        } else {
            self.primary()?
        };
        if self.eat_op("**") {
            let exp = self.factor()?;
            let span = Span::new(base.span.start, exp.span.end);
            return Ok(Expr {
                kind: ExprKind::BinOp { left: Box::new(base), op: BinOp::Pow, right: Box::new(exp) },
                span,
            });
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let mut e = self.atom()?;
        loop {
            if self.at_op("(") {
                self.advance();
                let (args, keywords) = self.arglist()?;
                let close = self.expect_op(")")?;
                let span = Span::new(e.span.start, close.span.end);
                e = Expr { kind: ExprKind::Call { func: Box::new(e), args, keywords }, span };
            } else if self.at_op("[") {
                self.advance();
                let index = self.subscriptlist()?;
                let close = self.expect_op("]")?;
                let span = Span::new(e.span.start, close.span.end);
                e = Expr { kind: ExprKind::Subscript { value: Box::new(e), index: Box::new(index) }, span };
            } else if self.at_op(".") {
                self.advance();
                let t = self.peek().clone();
                if t.kind != TokKind::Name {
                    return Err(self.error("expected attribute name"));
                }
                self.advance();
                let attr = Name { id: self.text(&t).to_string(), span: t.span };
                let span = Span::new(e.span.start, t.span.end);
                e = Expr { kind: ExprKind::Attribute { value: Box::new(e), attr }, span };
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn subscriptlist(&mut self) -> PResult<Expr> {
        let first = self.subscript()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let start = first.span.start;
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_op("]") {
                break;
            }
            items.push(self.subscript()?);
        }
        Ok(Expr { kind: ExprKind::Tuple(items), span: Span::new(start, self.last_end) })
    }

    fn subscript(&mut self) -> PResult<Expr> {
        let start = self.peek().span.start;
        let lower = if self.at_op(":") { None } else { Some(self.star_or_namedexpr()?) };
        if !self.at_op(":") {
            return lower.ok_or_else(|| self.error("expected subscript"));
        }
        self.advance();
        let bound_end = |p: &Self| p.at_op(":") || p.at_op("]") || p.at_op(",");
        let upper = if bound_end(self) { None } else { Some(Box::new(self.test()?)) };
        let mut step = None;
        if self.eat_op(":") && !(self.at_op("]") || self.at_op(",")) {
            step = Some(Box::new(self.test()?));
        }
        Ok(Expr {
            kind: ExprKind::Slice { lower: lower.map(Box::new), upper, step },
            span: Span::new(start, self.last_end),
        })
    }

    fn comp_for(&mut self) -> PResult<Vec<Comprehension>> {
        let mut gens = Vec::new();
        loop {
            let is_async = if self.at_kw("async") && self.nth_is_kw(1, "for") {
                self.advance();
                true
            } else {
                false
            };
            if !self.eat_kw("for") {
                break;
            }
            let target = self.exprlist()?;
            self.expect_kw("in")?;
            let iter = self.or_test()?;
            let mut ifs = Vec::new();
            while self.eat_kw("if") {
                ifs.push(self.test_nocond()?);
            }
            gens.push(Comprehension { target, iter, ifs, is_async });
            if !(self.at_kw("for") || (self.at_kw("async") && self.nth_is_kw(1, "for"))) {
                break;
            }
        }
        if gens.is_empty() {
            return Err(self.error("expected 'for'"));
        }
        Ok(gens)
    }

    fn yield_expr(&mut self) -> PResult<Expr> {
        let st = self.expect_kw("yield")?.span.start;
        if self.eat_kw("from") {
            let v = self.test()?;
            return Ok(Expr { span: Span::new(st, v.span.end), kind: ExprKind::YieldFrom(Box::new(v)) });
        }
        if self.at_expr_end() {
            return Ok(Expr { span: Span::new(st, self.last_end), kind: ExprKind::Yield(None) });
        }
        let v = self.testlist_star_expr()?;
        Ok(Expr { span: Span::new(st, v.span.end), kind: ExprKind::Yield(Some(Box::new(v))) })
    }

    fn atom(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        match t.kind {
            TokKind::Number => {
                self.advance();
                Ok(Expr { kind: ExprKind::Constant(self.text(&t).to_string()), span: t.span })
            }
            TokKind::Str => self.strings(),
            TokKind::Name => {
                let s = self.text(&t);
                match s {
                    "None" | "True" | "False" => {
                        self.advance();
                        Ok(Expr { kind: ExprKind::Constant(s.to_string()), span: t.span })
                    }
                    _ if is_keyword(s) => Err(self.error("unexpected keyword")),
                    _ => {
                        self.advance();
                        Ok(Expr { kind: ExprKind::Name(s.to_string()), span: t.span })
                    }
                }
            }
            TokKind::Op => match self.text(&t) {
                "..." => {
                    self.advance();
                    Ok(Expr { kind: ExprKind::Constant("...".into()), span: t.span })
                }
                "(" => self.paren_atom(),
                "[" => self.list_atom(),
                "{" => self.brace_atom(),
                _ => Err(self.error("unexpected token")),
            },
            _ => Err(self.error("unexpected token")),
        }
    }

    fn paren_atom(&mut self) -> PResult<Expr> {
        let open = self.advance();
        if self.at_op(")") {
            let close = self.advance();
            return Ok(Expr { kind: ExprKind::Tuple(Vec::new()), span: open.span.cover(close.span) });
        }
        if self.at_kw("yield") {
            let e = self.yield_expr()?;
            self.expect_op(")")?;
            return Ok(e);
        }
        let first = self.star_or_namedexpr()?;
        if self.at_kw("for") || (self.at_kw("async") && self.nth_is_kw(1, "for")) {
            let generators = self.comp_for()?;
            let close = self.expect_op(")")?;
            return Ok(Expr {
                kind: ExprKind::Comp { kind: CompKind::Generator, elt: Box::new(first), value: None, generators },
                span: open.span.cover(close.span),
            });
        }
        if self.at_op(",") {
            let mut items = vec![first];
            while self.eat_op(",") {
                if self.at_op(")") {
                    break;
                }
                items.push(self.star_or_namedexpr()?);
            }
            let close = self.expect_op(")")?;
            return Ok(Expr { kind: ExprKind::Tuple(items), span: open.span.cover(close.span) });
        }
        self.expect_op(")")?;
        Ok(first)
    }

    fn list_atom(&mut self) -> PResult<Expr> {
        let open = self.advance();
        if self.at_op("]") {
            let close = self.advance();
            return Ok(Expr { kind: ExprKind::List(Vec::new()), span: open.span.cover(close.span) });
        }
        let first = self.star_or_namedexpr()?;
        if self.at_kw("for") || (self.at_kw("async") && self.nth_is_kw(1, "for")) {
            let generators = self.comp_for()?;
            let close = self.expect_op("]")?;
            return Ok(Expr {
                kind: ExprKind::Comp { kind: CompKind::List, elt: Box::new(first), value: None, generators },
                span: open.span.cover(close.span),
            });
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_op("]") {
                break;
            }
            items.push(self.star_or_namedexpr()?);
        }
        let close = self.expect_op("]")?;
        Ok(Expr { kind: ExprKind::List(items), span: open.span.cover(close.span) })
    }

    fn brace_atom(&mut self) -> PResult<Expr> {
        let open = self.advance();
        if self.at_op("}") {
            let close = self.advance();
            return Ok(Expr {
                kind: ExprKind::Dict { keys: Vec::new(), values: Vec::new() },
                span: open.span.cover(close.span),
            });
        }
        // Dict entry: `k: v` or `**m`; set entry: `x` or `*xs`.
        let dict_entry = |p: &mut Self| -> PResult<(Option<Expr>, Expr)> {
            if p.eat_op("**") {
                return Ok((None, p.expr()?));
            }
            let k = p.test()?;
            p.expect_op(":")?;
            Ok((Some(k), p.test()?))
        };
        let is_dict = if self.at_op("**") {
            true
        } else {
            let save = (self.pos, self.last_end);
            let first = self.star_or_namedexpr()?;
            let dict = self.at_op(":") && !matches!(first.kind, ExprKind::Starred(_));
            self.pos = save.0;
            self.last_end = save.1;
            dict
        };
        if is_dict {
            let (k, v) = dict_entry(self)?;
            let at_for = self.at_kw("for") || (self.at_kw("async") && self.nth_is_kw(1, "for"));
            if let (Some(k), true) = (k.as_ref(), at_for) {
                let generators = self.comp_for()?;
                let close = self.expect_op("}")?;
                return Ok(Expr {
                    kind: ExprKind::Comp {
                        kind: CompKind::Dict,
                        elt: Box::new(k.clone()),
                        value: Some(Box::new(v)),
                        generators,
                    },
                    span: open.span.cover(close.span),
                });
            }
            let mut keys = vec![k];
            let mut values = vec![v];
            while self.eat_op(",") {
                if self.at_op("}") {
                    break;
                }
                let (k, v) = dict_entry(self)?;
                keys.push(k);
                values.push(v);
            }
            let close = self.expect_op("}")?;
            return Ok(Expr { kind: ExprKind::Dict { keys, values }, span: open.span.cover(close.span) });
        }
        let first = self.star_or_namedexpr()?;
        if self.at_kw("for") || (self.at_kw("async") && self.nth_is_kw(1, "for")) {
            let generators = self.comp_for()?;
            let close = self.expect_op("}")?;
            return Ok(Expr {
                kind: ExprKind::Comp { kind: CompKind::Set, elt: Box::new(first), value: None, generators },
                span: open.span.cover(close.span),
            });
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_op("}") {
                break;
            }
            items.push(self.star_or_namedexpr()?);
        }
        let close = self.expect_op("}")?;
        Ok(Expr { kind: ExprKind::Set(items), span: open.span.cover(close.span) })
    }

    /// Adjacent string literals; any f-string part turns the whole atom into
    /// an [`ExprKind::FString`].
    fn strings(&mut self) -> PResult<Expr> {
        let mut parts: Vec<Token> = Vec::new();
        while self.at_kind(TokKind::Str) {
            parts.push(self.advance());
        }
        let span = parts.first().unwrap().span.cover(parts.last().unwrap().span);
        let is_f = |t: &Token| {
            let txt = self.text(t);
            let q = txt.find(['\'', '"']).unwrap_or(0);
            txt[..q].to_ascii_lowercase().contains('f')
        };
        if !parts.iter().any(is_f) {
            let text = parts.iter().map(|t| self.text(t)).collect::<Vec<_>>().join(" ");
            return Ok(Expr { kind: ExprKind::Constant(text), span });
        }
        let mut template = String::new();
        let mut values = Vec::new();
        for (i, t) in parts.iter().enumerate() {
            if i > 0 {
                template.push(' ');
            }
            if is_f(t) {
                fstring_fields(self.src, t.span, &mut template, &mut values)?;
            } else {
                template.push_str(self.text(t));
            }
        }
        Ok(Expr { kind: ExprKind::FString { template, values }, span })
    }
}

/// Splits an f-string token into its literal template and parsed replacement
/// field expressions.
fn fstring_fields(src: &str, span: Span, template: &mut String, values: &mut Vec<Expr>) -> PResult<()> {
    let text = &src[span.start..span.end];
    let q = text.find(['\'', '"']).unwrap();
    let quote = &text[q..q + 1];
    let qlen = if text[q..].starts_with(&quote.repeat(3)) && text.len() - q >= 6 { 3 } else { 1 };
    let body_start = span.start + q + qlen;
    let body_end = span.end - qlen;
    template.push_str(&text[..q + qlen]);
    scan_fields(src, body_start, body_end, template, values)?;
    template.push_str(&src[body_end..span.end]);
    Ok(())
}

fn scan_fields(src: &str, start: usize, end: usize, template: &mut String, values: &mut Vec<Expr>) -> PResult<()> {
    let bytes = src.as_bytes();
    let mut i = start;
    while i < end {
        let c = bytes[i];
        if c == b'{' && i + 1 < end && bytes[i + 1] == b'{' {
            template.push_str("{{");
            i += 2;
        } else if c == b'}' && i + 1 < end && bytes[i + 1] == b'}' {
            template.push_str("}}");
            i += 2;
        } else if c == b'{' {
            // Expression runs to the first top-level '!', ':', '=' or '}'.
            let expr_start = i + 1;
            let mut j = expr_start;
            let mut depth = 0usize;
            let mut in_str: Option<u8> = None;
            while j < end {
                let d = bytes[j];
                if let Some(qc) = in_str {
                    if d == qc {
                        in_str = None;
                    }
                } else if d == b'\'' || d == b'"' {
                    in_str = Some(d);
                } else if matches!(d, b'(' | b'[' | b'{') {
                    depth += 1;
                } else if matches!(d, b')' | b']') || (d == b'}' && depth > 0) {
                    depth = depth.saturating_sub(1);
                } else if depth == 0 {
                    let next = bytes.get(j + 1).copied();
                    let is_cmp = matches!(next, Some(b'='));
                    if d == b'}' || d == b':' || (d == b'!' && !is_cmp) {
                        break;
                    }
                    if d == b'=' && !is_cmp && j > expr_start && !matches!(bytes[j - 1], b'=' | b'!' | b'<' | b'>') {
                        break;
                    }
                }
                j += 1;
            }
            if j >= end {
                return Err(SyntaxError::at(src, i, "f-string: expecting '}'"));
            }
            values.push(parse_fragment(src, expr_start, j)?);
            template.push('{');
            // Conversion and format spec (which may itself hold fields).
            let mut k = j;
            if bytes[k] == b'=' {
                template.push('=');
                k += 1;
            }
            if bytes[k] == b'!' {
                template.push_str(&src[k..k + 2]);
                k += 2;
            }
            if k < end && bytes[k] == b':' {
                template.push(':');
                let spec_start = k + 1;
                let mut m = spec_start;
                let mut nest = 0usize;
                while m < end {
                    match bytes[m] {
                        b'{' => nest += 1,
                        b'}' if nest == 0 => break,
                        b'}' => nest -= 1,
                        _ => {}
                    }
                    m += 1;
                }
                scan_fields(src, spec_start, m, template, values)?;
                k = m;
            }
            if k >= end || bytes[k] != b'}' {
                return Err(SyntaxError::at(src, k.min(end), "f-string: expecting '}'"));
            }
            template.push('}');
            i = k + 1;
        } else {
            let ch = src[i..].chars().next().unwrap();
            template.push(ch);
            i += ch.len_utf8();
        }
    }
    Ok(())
}

/// Rejects assignment to non-assignable expressions, as CPython does at
/// compile time.
fn check_target(src: &str, e: &Expr, single: bool) -> PResult<()> {
    match &e.kind {
        ExprKind::Name(_) | ExprKind::Attribute { .. } | ExprKind::Subscript { .. } => Ok(()),
        ExprKind::Tuple(items) | ExprKind::List(items) if !single => {
            for it in items {
                check_target(src, it, false)?;
            }
            Ok(())
        }
        ExprKind::Starred(inner) if !single => check_target(src, inner, false),
        _ => Err(SyntaxError::at(src, e.span.start, "cannot assign to expression")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Module {
        parse_module(src).unwrap_or_else(|e| panic!("{e}\n{src}"))
    }

    fn body_of(m: &Module) -> &[Stmt] {
        match &m.body[0].kind {
            StmtKind::FunctionDef { body, .. } => &body.stmts,
            _ => panic!("not a function"),
        }
    }

    #[test]
    fn parses_common_function_shapes() {
        let src = r#"
from typing import List

def f(xs: List[int], k=2, *args, flag: bool = False, **kw) -> int:
    """doc"""
    total = 0
    for i, x in enumerate(xs):
        if x % k == 0 and not flag:
            total += x
        elif x < 0:
            continue
        else:
            total -= 1
    ys = [y * 2 for y in xs if y > 0]
    d = {a: b for a, b in zip(xs, ys)}
    s = {1, 2, *xs}
    m = {**kw, 'a': 1}
    t = (1,)
    z = xs[1:-1:2], xs[::2]
    g = sorted(xs, key=lambda v: (-v, v))
    w = x if x else -1
    while total > 10:
        total //= 2
    return total
"#;
        let m = parse(src);
        assert_eq!(m.body.len(), 2);
        assert_eq!(body_of(&Module { body: vec![m.body[1].clone()] }).len(), 13);
    }

    #[test]
    fn elif_chain_nests() {
        let m = parse("def f(x):\n    if x: a = 1\n    elif x > 1: a = 2\n    else: a = 3\n    return a\n");
        let StmtKind::If { orelse: Some(o), else_kw, body, .. } = &body_of(&m)[0].kind else { panic!() };
        assert!(body.inline);
        assert!(else_kw.is_none());
        assert!(matches!(&o.stmts[0].kind, StmtKind::If { is_elif: true, else_kw: Some(_), .. }));
    }

    #[test]
    fn statement_spans_cover_source_text() {
        let src = "def f(x):\n    v = x + 1  # c\n    return v\n";
        let m = parse(src);
        let b = body_of(&m);
        assert_eq!(&src[b[0].span.start..b[0].span.end], "v = x + 1");
        assert_eq!(&src[b[1].span.start..b[1].span.end], "return v");
        assert_eq!(&src[m.body[0].span.start..m.body[0].span.end], src.trim_end());
    }

    #[test]
    fn fstring_fields_are_parsed() {
        let src = "def f(x, w):\n    return f'{x!r:>{w}} and {x + 1}'\n";
        let m = parse(src);
        let StmtKind::Return(Some(e)) = &body_of(&m)[0].kind else { panic!() };
        let ExprKind::FString { values, template } = &e.kind else { panic!() };
        assert_eq!(values.len(), 3);
        assert_eq!(template, "f'{!r:>{}} and {}'");
        let spans: Vec<&str> = values.iter().map(|v| &src[v.span.start..v.span.end]).collect();
        assert_eq!(spans, vec!["x", "w", "x + 1"]);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_module("def f(:\n    pass\n").unwrap_err();
        assert_eq!((e.line, e.col), (1, 7));
        assert!(parse_module("x = = 1\n").is_err());
        assert!(parse_module("1 = x\n").is_err());
        assert!(parse_module("def f():\nreturn 1\n").is_err());
        assert!(parse_module("def f():\n    return (1\n").is_err());
    }

    #[test]
    fn compound_statements_outside_the_subset_still_parse() {
        let src = "class A:\n    pass\n\ndef f():\n    try:\n        x = 1\n    except ValueError as e:\n        x = 2\n    finally:\n        pass\n    with open('p') as fh:\n        pass\n    return x\n";
        let m = parse(src);
        assert_eq!(m.body.len(), 2);
    }

    #[test]
    fn keyword_arguments_and_star_args() {
        let m = parse("def f(*a, **k):\n    return g(1, *a, key=2, **k)\n");
        let StmtKind::Return(Some(e)) = &body_of(&m)[0].kind else { panic!() };
        let ExprKind::Call { args, keywords, .. } = &e.kind else { panic!() };
        assert_eq!(args.len(), 2);
        assert_eq!(keywords.len(), 2);
        assert_eq!(keywords[0].arg.as_ref().unwrap().id, "key");
    }
}
