//! Lexical scopes and name resolution.
//!
//! Every identifier occurrence that denotes a variable is recorded with the
//! scope it appears in. Attribute names and keyword-argument names are not
//! variables and are tracked separately.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::lexer::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeKind {
    Module,
    Function,
    Lambda,
    Comprehension,
    Class,
}

#[derive(Debug, Clone)]
pub struct Scope {
    pub kind: ScopeKind,
    pub parent: Option<usize>,
    pub bound: BTreeSet<String>,
    pub declared_global: BTreeSet<String>,
    pub declared_nonlocal: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub name: String,
    pub span: Span,
    pub scope: usize,
    pub binding: bool,
}

#[derive(Debug, Clone)]
pub struct NameTable {
    pub scopes: Vec<Scope>,
    /// Sorted by source position.
    pub occurrences: Vec<Occurrence>,
    pub keyword_args: BTreeSet<String>,
    pub imported: BTreeSet<String>,
    pub declared_global: BTreeSet<String>,
}

pub const BUILTINS: &[&str] = &[
    "abs",
    "aiter",
    "all",
    "anext",
    "any",
    "ascii",
    "bin",
    "bool",
    "breakpoint",
    "bytearray",
    "bytes",
    "callable",
    "chr",
    "classmethod",
    "compile",
    "complex",
    "copyright",
    "credits",
    "delattr",
    "dict",
    "dir",
    "divmod",
    "enumerate",
    "eval",
    "exec",
    "exit",
    "filter",
    "float",
    "format",
    "frozenset",
    "getattr",
    "globals",
    "hasattr",
    "hash",
    "help",
    "hex",
    "id",
    "input",
    "int",
    "isinstance",
    "issubclass",
    "iter",
    "len",
    "license",
    "list",
    "locals",
    "map",
    "max",
    "memoryview",
    "min",
    "next",
    "object",
    "oct",
    "open",
    "ord",
    "pow",
    "print",
    "property",
    "quit",
    "range",
    "repr",
    "reversed",
    "round",
    "set",
    "setattr",
    "slice",
    "sorted",
    "staticmethod",
    "str",
    "sum",
    "super",
    "tuple",
    "type",
    "vars",
    "zip",
    "__import__",
    "__name__",
    "__file__",
    "__doc__",
    "__builtins__",
    "BaseException",
    "Exception",
    "ArithmeticError",
    "AssertionError",
    "AttributeError",
    "EOFError",
    "IndexError",
    "KeyError",
    "KeyboardInterrupt",
    "LookupError",
    "MemoryError",
    "NameError",
    "NotImplemented",
    "NotImplementedError",
    "OSError",
    "OverflowError",
    "RecursionError",
    "RuntimeError",
    "StopIteration",
    "SystemExit",
    "TypeError",
    "ValueError",
    "ZeroDivisionError",
    "Ellipsis",
];

pub fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&name)
}

impl NameTable {
    pub fn build(module: &Module) -> NameTable {
        let mut b = Builder {
            scopes: vec![Scope {
                kind: ScopeKind::Module,
                parent: None,
                bound: BTreeSet::new(),
                declared_global: BTreeSet::new(),
                declared_nonlocal: BTreeSet::new(),
            }],
            occurrences: Vec::new(),
            keyword_args: BTreeSet::new(),
            imported: BTreeSet::new(),
            declared_global: BTreeSet::new(),
        };
        for s in &module.body {
            b.stmt(s, 0);
        }
        let mut occurrences = b.occurrences;
        occurrences.sort_by_key(|o| (o.span.start, o.span.end));
        occurrences.dedup_by(|a, b| a.span == b.span && a.name == b.name);
        NameTable {
            scopes: b.scopes,
            occurrences,
            keyword_args: b.keyword_args,
            imported: b.imported,
            declared_global: b.declared_global,
        }
    }

    /// Scope that binds the occurrence, or `None` when the name is free
    /// (a builtin or something defined outside the program).
    pub fn resolve(&self, occ: &Occurrence) -> Option<usize> {
        let name = occ.name.as_str();
        let mut cur = occ.scope;
        let mut first = true;
        loop {
            let sc = &self.scopes[cur];
            if sc.declared_global.contains(name) {
                return self.scopes[0].bound.contains(name).then_some(0);
            }
            // Class bodies are invisible to nested scopes.
            let visible = first || sc.kind != ScopeKind::Class;
            if visible && sc.bound.contains(name) && !sc.declared_nonlocal.contains(name) {
                return Some(cur);
            }
            first = false;
            cur = sc.parent?;
        }
    }

    /// Names whose occurrences are all bound inside the program and that can
    /// be consistently renamed without changing behavior, in first-occurrence
    /// order. `fixed` lists names referenced from outside (entry point, test
    /// code) that must keep their spelling.
    pub fn renameable(&self, fixed: &BTreeSet<String>) -> Vec<String> {
        let mut free: BTreeSet<&str> = BTreeSet::new();
        let mut bound: BTreeSet<&str> = BTreeSet::new();
        for o in &self.occurrences {
            match self.resolve(o) {
                Some(_) => {
                    bound.insert(&o.name);
                }
                None => {
                    free.insert(&o.name);
                }
            }
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for o in &self.occurrences {
            let n = o.name.as_str();
            if seen.contains(n) {
                continue;
            }
            seen.insert(n);
            let excluded = !bound.contains(n)
                || free.contains(n)
                || fixed.contains(n)
                || is_builtin(n)
                || self.imported.contains(n)
                || self.keyword_args.contains(n)
                || self.declared_global.contains(n)
                || (n.starts_with("__") && n.ends_with("__"));
            if !excluded {
                out.push(n.to_string());
            }
        }
        out
    }

    /// Every occurrence span per name.
    pub fn spans_by_name(&self) -> BTreeMap<&str, Vec<Span>> {
        let mut m: BTreeMap<&str, Vec<Span>> = BTreeMap::new();
        for o in &self.occurrences {
            m.entry(o.name.as_str()).or_default().push(o.span);
        }
        m
    }

    /// All identifiers the program mentions in any role (variables,
    /// attributes, keyword names, imports).
    pub fn all_identifiers(&self) -> BTreeSet<String> {
        let mut s: BTreeSet<String> = self.occurrences.iter().map(|o| o.name.clone()).collect();
        s.extend(self.keyword_args.iter().cloned());
        s.extend(self.imported.iter().cloned());
        s
    }
}

struct Builder {
    scopes: Vec<Scope>,
    occurrences: Vec<Occurrence>,
    keyword_args: BTreeSet<String>,
    imported: BTreeSet<String>,
    declared_global: BTreeSet<String>,
}

impl Builder {
    fn push_scope(&mut self, kind: ScopeKind, parent: usize) -> usize {
        self.scopes.push(Scope {
            kind,
            parent: Some(parent),
            bound: BTreeSet::new(),
            declared_global: BTreeSet::new(),
            declared_nonlocal: BTreeSet::new(),
        });
        self.scopes.len() - 1
    }

    fn bind(&mut self, name: &str, span: Span, scope: usize) {
        let target = if self.scopes[scope].declared_global.contains(name) { 0 } else { scope };
        self.scopes[target].bound.insert(name.to_string());
        self.occurrences.push(Occurrence { name: name.to_string(), span, scope, binding: true });
    }

    fn load(&mut self, name: &str, span: Span, scope: usize) {
        self.occurrences.push(Occurrence { name: name.to_string(), span, scope, binding: false });
    }

    /// Pre-scan a function body for `global` / `nonlocal` declarations,
    /// which apply to the whole body regardless of position.
    fn declare(&mut self, stmts: &[Stmt], scope: usize) {
        walk_stmts(stmts, &mut |s| match &s.kind {
            StmtKind::Global(names) => {
                for n in names {
                    self.scopes[scope].declared_global.insert(n.id.clone());
                    self.declared_global.insert(n.id.clone());
                }
            }
            StmtKind::Nonlocal(names) => {
                for n in names {
                    self.scopes[scope].declared_nonlocal.insert(n.id.clone());
                    self.declared_global.insert(n.id.clone());
                }
            }
            _ => {}
        });
    }

    fn stmts(&mut self, stmts: &[Stmt], scope: usize) {
        for s in stmts {
            self.stmt(s, scope);
        }
    }

    fn stmt(&mut self, s: &Stmt, scope: usize) {
        match &s.kind {
            StmtKind::FunctionDef { name, params, returns, body, decorators, .. } => {
                for d in decorators {
                    self.expr(d, scope);
                }
                for p in params {
                    if let Some(d) = &p.default {
                        self.expr(d, scope);
                    }
                    if let Some(a) = &p.annotation {
                        self.expr(a, scope);
                    }
                }
                if let Some(r) = returns {
                    self.expr(r, scope);
                }
                self.bind(&name.id, name.span, scope);
                let inner = self.push_scope(ScopeKind::Function, scope);
                self.declare(&body.stmts, inner);
                for p in params {
                    self.bind(&p.name.id, p.name.span, inner);
                }
                self.stmts(&body.stmts, inner);
            }
            StmtKind::ClassDef { name, bases, keywords, body, decorators } => {
                for e in decorators.iter().chain(bases) {
                    self.expr(e, scope);
                }
                self.keywords(keywords, scope);
                self.bind(&name.id, name.span, scope);
                let inner = self.push_scope(ScopeKind::Class, scope);
                self.stmts(&body.stmts, inner);
            }
            StmtKind::Assign { targets, value } => {
                self.expr(value, scope);
                for t in targets {
                    self.target(t, scope);
                }
            }
            StmtKind::AugAssign { target, value, .. } => {
                self.expr(value, scope);
                self.target(target, scope);
            }
            StmtKind::AnnAssign { target, annotation, value } => {
                if let Some(v) = value {
                    self.expr(v, scope);
                }
                self.expr(annotation, scope);
                self.target(target, scope);
            }
            StmtKind::For { target, iter, body, orelse, .. } => {
                self.expr(iter, scope);
                self.target(target, scope);
                self.stmts(&body.stmts, scope);
                if let Some(o) = orelse {
                    self.stmts(&o.stmts, scope);
                }
            }
            StmtKind::Del(targets) => {
                for t in targets {
                    self.target(t, scope);
                }
            }
            StmtKind::Global(names) | StmtKind::Nonlocal(names) => {
                for n in names {
                    self.load(&n.id, n.span, scope);
                }
            }
            StmtKind::Import(aliases) | StmtKind::ImportFrom { names: aliases, .. } => {
                for a in aliases {
                    if a.name == "*" {
                        continue;
                    }
                    let bound = a.bound_name().to_string();
                    self.imported.insert(bound.clone());
                    let span = a.asname.as_ref().map_or(a.span, |n| n.span);
                    self.scopes[scope].bound.insert(bound.clone());
                    self.occurrences.push(Occurrence { name: bound, span, scope, binding: true });
                }
            }
            StmtKind::Try { body, handlers, orelse, finalbody } => {
                self.stmts(&body.stmts, scope);
                for h in handlers {
                    if let Some(t) = &h.typ {
                        self.expr(t, scope);
                    }
                    if let Some(n) = &h.name {
                        self.bind(&n.id, n.span, scope);
                    }
                    self.stmts(&h.body.stmts, scope);
                }
                for o in [orelse, finalbody].into_iter().flatten() {
                    self.stmts(&o.stmts, scope);
                }
            }
            StmtKind::With { items, body, .. } => {
                for it in items {
                    self.expr(&it.context, scope);
                    if let Some(t) = &it.target {
                        self.target(t, scope);
                    }
                }
                self.stmts(&body.stmts, scope);
            }
            StmtKind::If { test, body, orelse, .. } | StmtKind::While { test, body, orelse } => {
                self.expr(test, scope);
                self.stmts(&body.stmts, scope);
                if let Some(o) = orelse {
                    self.stmts(&o.stmts, scope);
                }
            }
            StmtKind::Expr(e) => self.expr(e, scope),
            StmtKind::Return(v) => {
                if let Some(v) = v {
                    self.expr(v, scope);
                }
            }
            StmtKind::Raise { exc, cause } => {
                for e in [exc, cause].into_iter().flatten() {
                    self.expr(e, scope);
                }
            }
            StmtKind::Assert { test, msg } => {
                self.expr(test, scope);
                if let Some(m) = msg {
                    self.expr(m, scope);
                }
            }
            StmtKind::Pass | StmtKind::Break | StmtKind::Continue => {}
        }
    }

    fn target(&mut self, t: &Expr, scope: usize) {
        match &t.kind {
            ExprKind::Name(n) => self.bind(n, t.span, scope),
            ExprKind::Tuple(items) | ExprKind::List(items) => {
                for it in items {
                    self.target(it, scope);
                }
            }
            ExprKind::Starred(inner) => self.target(inner, scope),
            _ => self.expr(t, scope),
        }
    }

    fn keywords(&mut self, keywords: &[Keyword], scope: usize) {
        for k in keywords {
            if let Some(a) = &k.arg {
                self.keyword_args.insert(a.id.clone());
            }
            self.expr(&k.value, scope);
        }
    }

    /// Nearest enclosing scope that is not a comprehension (walrus target).
    fn walrus_scope(&self, mut scope: usize) -> usize {
        while self.scopes[scope].kind == ScopeKind::Comprehension {
            scope = self.scopes[scope].parent.unwrap();
        }
        scope
    }

    fn expr(&mut self, e: &Expr, scope: usize) {
        match &e.kind {
            ExprKind::Name(n) => self.load(n, e.span, scope),
            ExprKind::Call { func, args, keywords } => {
                self.expr(func, scope);
                for a in args {
                    self.expr(a, scope);
                }
                self.keywords(keywords, scope);
            }
            ExprKind::Lambda { params, body } => {
                for p in params {
                    if let Some(d) = &p.default {
                        self.expr(d, scope);
                    }
                }
                let inner = self.push_scope(ScopeKind::Lambda, scope);
                for p in params {
                    self.bind(&p.name.id, p.name.span, inner);
                }
                self.expr(body, inner);
            }
            ExprKind::Comp { elt, value, generators, .. } => {
                // The first iterable is evaluated in the enclosing scope.
                self.expr(&generators[0].iter, scope);
                let inner = self.push_scope(ScopeKind::Comprehension, scope);
                for (i, g) in generators.iter().enumerate() {
                    if i > 0 {
                        self.expr(&g.iter, inner);
                    }
                    self.target(&g.target, inner);
                    for c in &g.ifs {
                        self.expr(c, inner);
                    }
                }
                self.expr(elt, inner);
                if let Some(v) = value {
                    self.expr(v, inner);
                }
            }
            ExprKind::NamedExpr { target, value } => {
                self.expr(value, scope);
                let ws = self.walrus_scope(scope);
                self.scopes[ws].bound.insert(target.id.clone());
                self.occurrences.push(Occurrence {
                    name: target.id.clone(),
                    span: target.span,
                    scope: ws,
                    binding: true,
                });
            }
            _ => {
                for c in child_exprs(e) {
                    self.expr(c, scope);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parser::parse_module;

    fn table(src: &str) -> NameTable {
        NameTable::build(&parse_module(src).unwrap())
    }

    #[test]
    fn renameable_excludes_free_builtin_and_keyword_names() {
        let src = "import math\n\ndef f(xs, key):\n    n = len(xs)\n    ys = sorted(xs, key=lambda v: -v)\n    return n + math.floor(total) + key\n";
        let t = table(src);
        let mut fixed = BTreeSet::new();
        fixed.insert("f".to_string());
        // `total` is free, `key` is a keyword-argument name, `len`/`sorted` builtins.
        assert_eq!(t.renameable(&fixed), vec!["xs", "n", "ys", "v"]);
    }

    #[test]
    fn comprehension_targets_are_local_to_the_comprehension() {
        let src = "def f(xs):\n    return [i * 2 for i in xs]\n";
        let t = table(src);
        let i_occ: Vec<_> = t.occurrences.iter().filter(|o| o.name == "i").collect();
        assert_eq!(i_occ.len(), 2);
        for o in i_occ {
            let s = t.resolve(o).unwrap();
            assert_eq!(t.scopes[s].kind, ScopeKind::Comprehension);
        }
    }

    #[test]
    fn global_declaration_binds_at_module_level() {
        let src = "counter = 0\ndef f():\n    global counter\n    counter += 1\n    return counter\n";
        let t = table(src);
        assert!(t.declared_global.contains("counter"));
        assert!(t.renameable(&BTreeSet::new()).iter().all(|n| n != "counter"));
    }

    #[test]
    fn helper_functions_resolve_at_module_scope() {
        let src = "def helper(a):\n    return a + 1\n\ndef f(x):\n    return helper(x)\n";
        let t = table(src);
        let uses: Vec<_> = t.occurrences.iter().filter(|o| o.name == "helper").collect();
        assert_eq!(uses.len(), 2);
        assert!(uses.iter().all(|o| t.resolve(o) == Some(0)));
    }
}
