//! Syntax tree for the supported Python subset, plus a canonical renderer.
//!
//! Every node carries the byte span it was parsed from so transformations can
//! edit the original text in place instead of re-printing it.

use super::lexer::Span;

#[derive(Debug, Clone, PartialEq)]
pub struct Name {
    pub id: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    MatMul,
    Div,
    FloorDiv,
    Mod,
    Pow,
    LShift,
    RShift,
    BitOr,
    BitXor,
    BitAnd,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::MatMul => "@",
            BinOp::Div => "/",
            BinOp::FloorDiv => "//",
            BinOp::Mod => "%",
            BinOp::Pow => "**",
            BinOp::LShift => "<<",
            BinOp::RShift => ">>",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
            BinOp::BitAnd => "&",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinOp> {
        Some(match s {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "@" => BinOp::MatMul,
            "/" => BinOp::Div,
            "//" => BinOp::FloorDiv,
            "%" => BinOp::Mod,
            "**" => BinOp::Pow,
            "<<" => BinOp::LShift,
            ">>" => BinOp::RShift,
            "|" => BinOp::BitOr,
            "^" => BinOp::BitXor,
            "&" => BinOp::BitAnd,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
    Pos,
    Invert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
    Is,
    IsNot,
    In,
    NotIn,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::NotEq => "!=",
            CmpOp::Lt => "<",
            CmpOp::LtE => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtE => ">=",
            CmpOp::Is => "is",
            CmpOp::IsNot => "is not",
            CmpOp::In => "in",
            CmpOp::NotIn => "not in",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompKind {
    List,
    Set,
    Dict,
    Generator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comprehension {
    pub target: Expr,
    pub iter: Expr,
    pub ifs: Vec<Expr>,
    pub is_async: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyword {
    /// `None` for `**mapping` arguments.
    pub arg: Option<Name>,
    pub value: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    PositionalOnly,
    Normal,
    VarArgs,
    KeywordOnly,
    VarKeywords,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: Name,
    pub kind: ParamKind,
    pub default: Option<Expr>,
    pub annotation: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Name(String),
    /// Literal kept as source text (numbers, plain strings, `None`, `...`).
    Constant(String),
    /// f-string: literal chunks interleaved with the embedded expressions.
    FString {
        template: String,
        values: Vec<Expr>,
    },
    BoolOp {
        op: BoolOp,
        values: Vec<Expr>,
    },
    BinOp {
        left: Box<Expr>,
        op: BinOp,
        right: Box<Expr>,
    },
    UnaryOp {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Compare {
        left: Box<Expr>,
        ops: Vec<CmpOp>,
        comparators: Vec<Expr>,
    },
    Call {
        func: Box<Expr>,
        args: Vec<Expr>,
        keywords: Vec<Keyword>,
    },
    Attribute {
        value: Box<Expr>,
        attr: Name,
    },
    Subscript {
        value: Box<Expr>,
        index: Box<Expr>,
    },
    Slice {
        lower: Option<Box<Expr>>,
        upper: Option<Box<Expr>>,
        step: Option<Box<Expr>>,
    },
    Starred(Box<Expr>),
    DoubleStarred(Box<Expr>),
    Tuple(Vec<Expr>),
    List(Vec<Expr>),
    Set(Vec<Expr>),
    /// `None` key marks a `**spread` entry.
    Dict {
        keys: Vec<Option<Expr>>,
        values: Vec<Expr>,
    },
    Comp {
        kind: CompKind,
        elt: Box<Expr>,
        value: Option<Box<Expr>>,
        generators: Vec<Comprehension>,
    },
    IfExp {
        test: Box<Expr>,
        body: Box<Expr>,
        orelse: Box<Expr>,
    },
    Lambda {
        params: Vec<Param>,
        body: Box<Expr>,
    },
    NamedExpr {
        target: Name,
        value: Box<Expr>,
    },
    Yield(Option<Box<Expr>>),
    YieldFrom(Box<Expr>),
    Await(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alias {
    pub name: String,
    pub asname: Option<Name>,
    pub span: Span,
}

impl Alias {
    /// The identifier this import binds in the enclosing scope.
    pub fn bound_name(&self) -> &str {
        match &self.asname {
            Some(a) => &a.id,
            None => self.name.split('.').next().unwrap_or(&self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExceptHandler {
    pub typ: Option<Expr>,
    pub name: Option<Name>,
    pub body: Suite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WithItem {
    pub context: Expr,
    pub target: Option<Expr>,
}

/// A statement suite. `inline` is true for `if c: x = 1` style suites that
/// sit on the header line.
#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub stmts: Vec<Stmt>,
    pub inline: bool,
}

impl Suite {
    pub fn span(&self) -> Span {
        let first = self.stmts.first().expect("suites are never empty").span;
        let last = self.stmts.last().unwrap().span;
        first.cover(last)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    FunctionDef {
        name: Name,
        params: Vec<Param>,
        returns: Option<Expr>,
        body: Suite,
        decorators: Vec<Expr>,
        is_async: bool,
    },
    ClassDef {
        name: Name,
        bases: Vec<Expr>,
        keywords: Vec<Keyword>,
        body: Suite,
        decorators: Vec<Expr>,
    },
    Assign {
        targets: Vec<Expr>,
        value: Expr,
    },
    AugAssign {
        target: Expr,
        op: BinOp,
        value: Expr,
    },
    AnnAssign {
        target: Expr,
        annotation: Expr,
        value: Option<Expr>,
    },
    Expr(Expr),
    Return(Option<Expr>),
    Pass,
    Break,
    Continue,
    Raise {
        exc: Option<Expr>,
        cause: Option<Expr>,
    },
    Assert {
        test: Expr,
        msg: Option<Expr>,
    },
    Del(Vec<Expr>),
    Global(Vec<Name>),
    Nonlocal(Vec<Name>),
    Import(Vec<Alias>),
    ImportFrom {
        module: String,
        level: usize,
        names: Vec<Alias>,
    },
    If {
        test: Expr,
        body: Suite,
        /// Either an `else:` suite or a single nested `If` with `is_elif` set.
        orelse: Option<Suite>,
        is_elif: bool,
        /// Span of the `else` keyword when an explicit else clause exists.
        else_kw: Option<Span>,
    },
    While {
        test: Expr,
        body: Suite,
        orelse: Option<Suite>,
    },
    For {
        target: Expr,
        iter: Expr,
        body: Suite,
        orelse: Option<Suite>,
        is_async: bool,
    },
    Try {
        body: Suite,
        handlers: Vec<ExceptHandler>,
        orelse: Option<Suite>,
        finalbody: Option<Suite>,
    },
    With {
        items: Vec<WithItem>,
        body: Suite,
        is_async: bool,
    },
}

impl StmtKind {
    pub fn label(&self) -> &'static str {
        match self {
            StmtKind::FunctionDef { .. } => "def",
            StmtKind::ClassDef { .. } => "class",
            StmtKind::Assign { .. } => "assign",
            StmtKind::AugAssign { .. } => "augassign",
            StmtKind::AnnAssign { .. } => "annassign",
            StmtKind::Expr(_) => "expr",
            StmtKind::Return(_) => "return",
            StmtKind::Pass => "pass",
            StmtKind::Break => "break",
            StmtKind::Continue => "continue",
            StmtKind::Raise { .. } => "raise",
            StmtKind::Assert { .. } => "assert",
            StmtKind::Del(_) => "del",
            StmtKind::Global(_) => "global",
            StmtKind::Nonlocal(_) => "nonlocal",
            StmtKind::Import(_) => "import",
            StmtKind::ImportFrom { .. } => "importfrom",
            StmtKind::If { .. } => "if",
            StmtKind::While { .. } => "while",
            StmtKind::For { .. } => "for",
            StmtKind::Try { .. } => "try",
            StmtKind::With { .. } => "with",
        }
    }

    pub fn is_compound(&self) -> bool {
        matches!(
            self,
            StmtKind::FunctionDef { .. }
                | StmtKind::ClassDef { .. }
                | StmtKind::If { .. }
                | StmtKind::While { .. }
                | StmtKind::For { .. }
                | StmtKind::Try { .. }
                | StmtKind::With { .. }
        )
    }

    /// Nested suites in source order.
    pub fn suites(&self) -> Vec<&Suite> {
        let mut out = Vec::new();
        match self {
            StmtKind::FunctionDef { body, .. } | StmtKind::ClassDef { body, .. } | StmtKind::With { body, .. } => {
                out.push(body)
            }
            StmtKind::If { body, orelse, .. }
            | StmtKind::While { body, orelse, .. }
            | StmtKind::For { body, orelse, .. } => {
                out.push(body);
                out.extend(orelse.iter());
            }
            StmtKind::Try { body, handlers, orelse, finalbody } => {
                out.push(body);
                out.extend(handlers.iter().map(|h| &h.body));
                out.extend(orelse.iter());
                out.extend(finalbody.iter());
            }
            _ => {}
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub body: Vec<Stmt>,
}

/// Canonical, fully parenthesized rendering. Identifiers that denote
/// variables pass through `rename`; attribute names, keyword-argument names
/// and literals are emitted verbatim.
pub struct Renderer<'a> {
    pub rename: &'a dyn Fn(&str) -> String,
}

impl<'a> Renderer<'a> {
    pub fn expr(&self, e: &Expr) -> String {
        let r = |x: &Expr| self.expr(x);
        match &e.kind {
            ExprKind::Name(n) => (self.rename)(n),
            ExprKind::Constant(c) => c.clone(),
            ExprKind::FString { template, values } => {
                let vals: Vec<String> = values.iter().map(r).collect();
                format!("f[{}|{}]", template, vals.join(","))
            }
            ExprKind::BoolOp { op, values } => {
                let sep = match op {
                    BoolOp::And => " and ",
                    BoolOp::Or => " or ",
                };
                format!("({})", values.iter().map(r).collect::<Vec<_>>().join(sep))
            }
            ExprKind::BinOp { left, op, right } => format!("({} {} {})", r(left), op.symbol(), r(right)),
            ExprKind::UnaryOp { op, operand } => {
                let s = match op {
                    UnaryOp::Not => "not ",
                    UnaryOp::Neg => "-",
                    UnaryOp::Pos => "+",
                    UnaryOp::Invert => "~",
                };
                format!("({}{})", s, r(operand))
            }
            ExprKind::Compare { left, ops, comparators } => {
                let mut s = format!("({}", r(left));
                for (op, c) in ops.iter().zip(comparators) {
                    s.push_str(&format!(" {} {}", op.symbol(), r(c)));
                }
                s.push(')');
                s
            }
            ExprKind::Call { func, args, keywords } => {
                let mut parts: Vec<String> = args.iter().map(r).collect();
                for k in keywords {
                    match &k.arg {
                        Some(a) => parts.push(format!("{}={}", a.id, r(&k.value))),
                        None => parts.push(format!("**{}", r(&k.value))),
                    }
                }
                format!("{}({})", r(func), parts.join(", "))
            }
            ExprKind::Attribute { value, attr } => format!("{}.{}", r(value), attr.id),
            ExprKind::Subscript { value, index } => format!("{}[{}]", r(value), r(index)),
            ExprKind::Slice { lower, upper, step } => {
                let o = |x: &Option<Box<Expr>>| x.as_ref().map(|v| r(v)).unwrap_or_default();
                match step {
                    Some(_) => format!("{}:{}:{}", o(lower), o(upper), o(step)),
                    None => format!("{}:{}", o(lower), o(upper)),
                }
            }
            ExprKind::Starred(v) => format!("*{}", r(v)),
            ExprKind::DoubleStarred(v) => format!("**{}", r(v)),
            ExprKind::Tuple(items) => {
                let inner: Vec<String> = items.iter().map(r).collect();
                if items.len() == 1 {
                    format!("({},)", inner[0])
                } else {
                    format!("({})", inner.join(", "))
                }
            }
            ExprKind::List(items) => format!("[{}]", items.iter().map(r).collect::<Vec<_>>().join(", ")),
            ExprKind::Set(items) => format!("{{{}}}", items.iter().map(r).collect::<Vec<_>>().join(", ")),
            ExprKind::Dict { keys, values } => {
                let parts: Vec<String> = keys
                    .iter()
                    .zip(values)
                    .map(|(k, v)| match k {
                        Some(k) => format!("{}: {}", r(k), r(v)),
                        None => format!("**{}", r(v)),
                    })
                    .collect();
                format!("{{{}}}", parts.join(", "))
            }
            ExprKind::Comp { kind, elt, value, generators } => {
                let mut s = r(elt);
                if let Some(v) = value {
                    s = format!("{}: {}", s, r(v));
                }
                for g in generators {
                    s.push_str(&format!(
                        " {}for {} in {}",
                        if g.is_async { "async " } else { "" },
                        r(&g.target),
                        r(&g.iter)
                    ));
                    for cond in &g.ifs {
                        s.push_str(&format!(" if {}", r(cond)));
                    }
                }
                match kind {
                    CompKind::List => format!("[{s}]"),
                    CompKind::Set | CompKind::Dict => format!("{{{s}}}"),
                    CompKind::Generator => format!("({s})"),
                }
            }
            ExprKind::IfExp { test, body, orelse } => format!("({} if {} else {})", r(body), r(test), r(orelse)),
            ExprKind::Lambda { params, body } => format!("(lambda {}: {})", self.params(params), r(body)),
            ExprKind::NamedExpr { target, value } => format!("({} := {})", (self.rename)(&target.id), r(value)),
            ExprKind::Yield(v) => match v {
                Some(v) => format!("(yield {})", r(v)),
                None => "(yield)".to_string(),
            },
            ExprKind::YieldFrom(v) => format!("(yield from {})", r(v)),
            ExprKind::Await(v) => format!("(await {})", r(v)),
        }
    }

    pub fn params(&self, params: &[Param]) -> String {
        let mut parts = Vec::new();
        let mut saw_kwonly_marker = false;
        for (i, p) in params.iter().enumerate() {
            let mut s = match p.kind {
                ParamKind::VarArgs => format!("*{}", (self.rename)(&p.name.id)),
                ParamKind::VarKeywords => format!("**{}", (self.rename)(&p.name.id)),
                ParamKind::KeywordOnly => {
                    let has_star = params.iter().any(|q| q.kind == ParamKind::VarArgs);
                    if !has_star && !saw_kwonly_marker {
                        parts.push("*".to_string());
                        saw_kwonly_marker = true;
                    }
                    (self.rename)(&p.name.id)
                }
                _ => (self.rename)(&p.name.id),
            };
            if let Some(a) = &p.annotation {
                s.push_str(&format!(": {}", self.expr(a)));
            }
            if let Some(d) = &p.default {
                s.push_str(&format!("={}", self.expr(d)));
            }
            parts.push(s);
            if p.kind == ParamKind::PositionalOnly
                && params.get(i + 1).is_none_or(|q| q.kind != ParamKind::PositionalOnly)
            {
                parts.push("/".to_string());
            }
        }
        parts.join(", ")
    }

    /// Header line of a statement: the whole statement for simple statements,
    /// the clause header for compound ones.
    pub fn header(&self, s: &Stmt) -> String {
        let r = |x: &Expr| self.expr(x);
        match &s.kind {
            StmtKind::FunctionDef { name, params, returns, decorators, is_async, .. } => {
                let mut out = String::new();
                for d in decorators {
                    out.push_str(&format!("@{} ", r(d)));
                }
                out.push_str(&format!(
                    "{}def {}({})",
                    if *is_async { "async " } else { "" },
                    (self.rename)(&name.id),
                    self.params(params)
                ));
                if let Some(ret) = returns {
                    out.push_str(&format!(" -> {}", r(ret)));
                }
                out.push(':');
                out
            }
            StmtKind::ClassDef { name, bases, keywords, decorators, .. } => {
                let mut parts: Vec<String> = bases.iter().map(r).collect();
                parts.extend(keywords.iter().map(|k| match &k.arg {
                    Some(a) => format!("{}={}", a.id, r(&k.value)),
                    None => format!("**{}", r(&k.value)),
                }));
                let decos: String = decorators.iter().map(|d| format!("@{} ", r(d))).collect();
                format!("{}class {}({}):", decos, (self.rename)(&name.id), parts.join(", "))
            }
            StmtKind::Assign { targets, value } => {
                let mut out = String::new();
                for t in targets {
                    out.push_str(&r(t));
                    out.push_str(" = ");
                }
                out.push_str(&r(value));
                out
            }
            StmtKind::AugAssign { target, op, value } => format!("{} {}= {}", r(target), op.symbol(), r(value)),
            StmtKind::AnnAssign { target, annotation, value } => match value {
                Some(v) => format!("{}: {} = {}", r(target), r(annotation), r(v)),
                None => format!("{}: {}", r(target), r(annotation)),
            },
            StmtKind::Expr(e) => r(e),
            StmtKind::Return(v) => match v {
                Some(v) => format!("return {}", r(v)),
                None => "return".to_string(),
            },
            StmtKind::Pass => "pass".into(),
            StmtKind::Break => "break".into(),
            StmtKind::Continue => "continue".into(),
            StmtKind::Raise { exc, cause } => match (exc, cause) {
                (None, _) => "raise".into(),
                (Some(e), None) => format!("raise {}", r(e)),
                (Some(e), Some(c)) => format!("raise {} from {}", r(e), r(c)),
            },
            StmtKind::Assert { test, msg } => match msg {
                Some(m) => format!("assert {}, {}", r(test), r(m)),
                None => format!("assert {}", r(test)),
            },
            StmtKind::Del(targets) => format!("del {}", targets.iter().map(r).collect::<Vec<_>>().join(", ")),
            StmtKind::Global(names) => {
                format!("global {}", names.iter().map(|n| (self.rename)(&n.id)).collect::<Vec<_>>().join(", "))
            }
            StmtKind::Nonlocal(names) => {
                format!("nonlocal {}", names.iter().map(|n| (self.rename)(&n.id)).collect::<Vec<_>>().join(", "))
            }
            StmtKind::Import(aliases) => format!("import {}", render_aliases(aliases)),
            StmtKind::ImportFrom { module, level, names } => {
                format!("from {}{} import {}", ".".repeat(*level), module, render_aliases(names))
            }
            StmtKind::If { test, is_elif, .. } => {
                format!("{} {}:", if *is_elif { "elif" } else { "if" }, r(test))
            }
            StmtKind::While { test, .. } => format!("while {}:", r(test)),
            StmtKind::For { target, iter, is_async, .. } => {
                format!("{}for {} in {}:", if *is_async { "async " } else { "" }, r(target), r(iter))
            }
            StmtKind::Try { .. } => "try:".into(),
            StmtKind::With { items, is_async, .. } => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|it| match &it.target {
                        Some(t) => format!("{} as {}", r(&it.context), r(t)),
                        None => r(&it.context),
                    })
                    .collect();
                format!("{}with {}:", if *is_async { "async " } else { "" }, parts.join(", "))
            }
        }
    }

    /// Full indented rendering of a statement list.
    pub fn block(&self, stmts: &[Stmt], depth: usize, out: &mut String) {
        for s in stmts {
            self.stmt(s, depth, out);
        }
    }

    pub fn stmt(&self, s: &Stmt, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        out.push_str(&pad);
        out.push_str(&self.header(s));
        out.push('\n');
        match &s.kind {
            StmtKind::If { body, orelse, .. } => {
                self.block(&body.stmts, depth + 1, out);
                if let Some(o) = orelse {
                    let nested_elif =
                        matches!(o.stmts.as_slice(), [Stmt { kind: StmtKind::If { is_elif: true, .. }, .. }]);
                    if nested_elif {
                        self.block(&o.stmts, depth, out);
                    } else {
                        out.push_str(&format!("{pad}else:\n"));
                        self.block(&o.stmts, depth + 1, out);
                    }
                }
            }
            StmtKind::While { body, orelse, .. } | StmtKind::For { body, orelse, .. } => {
                self.block(&body.stmts, depth + 1, out);
                if let Some(o) = orelse {
                    out.push_str(&format!("{pad}else:\n"));
                    self.block(&o.stmts, depth + 1, out);
                }
            }
            StmtKind::Try { body, handlers, orelse, finalbody } => {
                self.block(&body.stmts, depth + 1, out);
                for h in handlers {
                    out.push_str(&pad);
                    out.push_str("except");
                    if let Some(t) = &h.typ {
                        out.push(' ');
                        out.push_str(&self.expr(t));
                    }
                    if let Some(n) = &h.name {
                        out.push_str(&format!(" as {}", (self.rename)(&n.id)));
                    }
                    out.push_str(":\n");
                    self.block(&h.body.stmts, depth + 1, out);
                }
                if let Some(o) = orelse {
                    out.push_str(&format!("{pad}else:\n"));
                    self.block(&o.stmts, depth + 1, out);
                }
                if let Some(f) = finalbody {
                    out.push_str(&format!("{pad}finally:\n"));
                    self.block(&f.stmts, depth + 1, out);
                }
            }
            StmtKind::FunctionDef { body, .. } | StmtKind::ClassDef { body, .. } | StmtKind::With { body, .. } => {
                self.block(&body.stmts, depth + 1, out);
            }
            _ => {}
        }
    }
}

fn render_aliases(aliases: &[Alias]) -> String {
    aliases
        .iter()
        .map(|a| match &a.asname {
            Some(n) => format!("{} as {}", a.name, n.id),
            None => a.name.clone(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Pre-order walk over every statement, descending into all suites.
pub fn walk_stmts<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in stmts {
        f(s);
        for suite in s.kind.suites() {
            walk_stmts(&suite.stmts, f);
        }
    }
}

/// Direct child expressions of an expression (not descending into them).
pub fn child_exprs(e: &Expr) -> Vec<&Expr> {
    let mut out: Vec<&Expr> = Vec::new();
    match &e.kind {
        ExprKind::Name(_) | ExprKind::Constant(_) => {}
        ExprKind::FString { values, .. } => out.extend(values.iter()),
        ExprKind::BoolOp { values, .. } => out.extend(values.iter()),
        ExprKind::BinOp { left, right, .. } => {
            out.push(left);
            out.push(right);
        }
        ExprKind::UnaryOp { operand, .. } => out.push(operand),
        ExprKind::Compare { left, comparators, .. } => {
            out.push(left);
            out.extend(comparators.iter());
        }
        ExprKind::Call { func, args, keywords } => {
            out.push(func);
            out.extend(args.iter());
            out.extend(keywords.iter().map(|k| &k.value));
        }
        ExprKind::Attribute { value, .. } => out.push(value),
        ExprKind::Subscript { value, index } => {
            out.push(value);
            out.push(index);
        }
        ExprKind::Slice { lower, upper, step } => {
            for x in [lower, upper, step].into_iter().flatten() {
                out.push(x);
            }
        }
        ExprKind::Starred(v) | ExprKind::DoubleStarred(v) | ExprKind::YieldFrom(v) | ExprKind::Await(v) => out.push(v),
        ExprKind::Tuple(items) | ExprKind::List(items) | ExprKind::Set(items) => out.extend(items.iter()),
        ExprKind::Dict { keys, values } => {
            for (k, v) in keys.iter().zip(values) {
                if let Some(k) = k {
                    out.push(k);
                }
                out.push(v);
            }
        }
        ExprKind::Comp { elt, value, generators, .. } => {
            out.push(elt);
            if let Some(v) = value {
                out.push(v);
            }
            for g in generators {
                out.push(&g.target);
                out.push(&g.iter);
                out.extend(g.ifs.iter());
            }
        }
        ExprKind::IfExp { test, body, orelse } => {
            out.push(test);
            out.push(body);
            out.push(orelse);
        }
        ExprKind::Lambda { params, body } => {
            for p in params {
                if let Some(d) = &p.default {
                    out.push(d);
                }
            }
            out.push(body);
        }
        ExprKind::NamedExpr { value, .. } => out.push(value),
        ExprKind::Yield(v) => {
            if let Some(v) = v {
                out.push(v);
            }
        }
    }
    out
}

/// Pre-order walk over an expression tree.
pub fn walk_expr<'a>(e: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    f(e);
    for c in child_exprs(e) {
        walk_expr(c, f);
    }
}

/// Expressions appearing directly in a statement's header (not in nested
/// suites).
pub fn header_exprs(s: &Stmt) -> Vec<&Expr> {
    let mut out: Vec<&Expr> = Vec::new();
    match &s.kind {
        StmtKind::FunctionDef { params, returns, decorators, .. } => {
            out.extend(decorators.iter());
            for p in params {
                out.extend(p.default.iter());
                out.extend(p.annotation.iter());
            }
            out.extend(returns.iter());
        }
        StmtKind::ClassDef { bases, keywords, decorators, .. } => {
            out.extend(decorators.iter());
            out.extend(bases.iter());
            out.extend(keywords.iter().map(|k| &k.value));
        }
        StmtKind::Assign { targets, value } => {
            out.extend(targets.iter());
            out.push(value);
        }
        StmtKind::AugAssign { target, value, .. } => {
            out.push(target);
            out.push(value);
        }
        StmtKind::AnnAssign { target, annotation, value } => {
            out.push(target);
            out.push(annotation);
            out.extend(value.iter());
        }
        StmtKind::Expr(e) => out.push(e),
        StmtKind::Return(v) => out.extend(v.iter()),
        StmtKind::Raise { exc, cause } => {
            out.extend(exc.iter());
            out.extend(cause.iter());
        }
        StmtKind::Assert { test, msg } => {
            out.push(test);
            out.extend(msg.iter());
        }
        StmtKind::Del(t) => out.extend(t.iter()),
        StmtKind::If { test, .. } | StmtKind::While { test, .. } => out.push(test),
        StmtKind::For { target, iter, .. } => {
            out.push(target);
            out.push(iter);
        }
        StmtKind::With { items, .. } => {
            for it in items {
                out.push(&it.context);
                out.extend(it.target.iter());
            }
        }
        StmtKind::Try { handlers, .. } => {
            for h in handlers {
                out.extend(h.typ.iter());
            }
        }
        StmtKind::Pass
        | StmtKind::Break
        | StmtKind::Continue
        | StmtKind::Global(_)
        | StmtKind::Nonlocal(_)
        | StmtKind::Import(_)
        | StmtKind::ImportFrom { .. } => {}
    }
    out
}
