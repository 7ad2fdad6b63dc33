//! Per-statement def/use sets and reaching definitions for the entry
//! function.
//!
//! Statements are numbered 1.. in pre-order over the entry function body:
//! simple statements and compound-statement headers are units, and compound
//! bodies recurse. Compound headers only account for the expressions in the
//! header (`if` test, `for` target and iterable, ...).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::ast::*;
use super::cfg::StmtGraph;
use super::lexer::Span;
use super::SubjectProgram;

/// Calls that do not disqualify a statement from being pure.
pub const PURE_CALLS: &[&str] = &["len", "min", "max", "abs", "int", "float", "str", "ord", "chr"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatementInfo {
    /// 1-based pre-order ordinal within the entry function.
    pub index: usize,
    pub span: Span,
    pub defs: BTreeSet<String>,
    pub uses: BTreeSet<String>,
    pub is_pure: bool,
    pub kind: &'static str,
    pub compound: bool,
    /// Identifier of the suite holding the statement and its position there.
    pub suite: usize,
    pub position: usize,
    /// Names read and rebound in place (`v += ...`, `del v`); their reads
    /// cannot be redirected to another variable.
    pub aug_targets: BTreeSet<String>,
    /// Names read inside a lambda body (deferred evaluation).
    pub lambda_uses: BTreeSet<String>,
}

/// Pre-order numbering of the entry body, keyed by node address.
pub(crate) fn number_statements(body: &[Stmt]) -> HashMap<*const Stmt, usize> {
    let mut map = HashMap::new();
    let mut next = 1;
    walk_stmts(body, &mut |s| {
        map.insert(s as *const Stmt, next);
        next += 1;
    });
    map
}

pub fn def_use_sets(program: &SubjectProgram) -> Vec<StatementInfo> {
    let mut out = Vec::new();
    let mut suite_counter = 0;
    collect_suite(program.entry_body(), &mut suite_counter, &mut out);
    out
}

fn collect_suite(stmts: &[Stmt], suite_counter: &mut usize, out: &mut Vec<StatementInfo>) {
    let suite = *suite_counter;
    *suite_counter += 1;
    for (position, s) in stmts.iter().enumerate() {
        let mut c = Collector::default();
        c.header(s);
        out.push(StatementInfo {
            index: out.len() + 1,
            span: s.span,
            defs: c.defs,
            uses: c.uses,
            is_pure: c.pure,
            kind: s.kind.label(),
            compound: s.kind.is_compound(),
            suite,
            position,
            aug_targets: c.aug_targets,
            lambda_uses: c.lambda_uses,
        });
        for sub in s.kind.suites() {
            collect_suite(&sub.stmts, suite_counter, out);
        }
    }
}

struct Collector {
    defs: BTreeSet<String>,
    uses: BTreeSet<String>,
    aug_targets: BTreeSet<String>,
    lambda_uses: BTreeSet<String>,
    pure: bool,
}

impl Default for Collector {
    fn default() -> Self {
        Collector {
            defs: BTreeSet::new(),
            uses: BTreeSet::new(),
            aug_targets: BTreeSet::new(),
            lambda_uses: BTreeSet::new(),
            pure: true,
        }
    }
}

impl Collector {
    fn header(&mut self, s: &Stmt) {
        let empty = BTreeSet::new();
        match &s.kind {
            StmtKind::Assign { targets, value } => {
                self.expr(value, &empty, false);
                for t in targets {
                    self.target(t);
                }
            }
            StmtKind::AugAssign { target, value, .. } => {
                self.expr(value, &empty, false);
                if let ExprKind::Name(n) = &target.kind {
                    self.uses.insert(n.clone());
                    self.defs.insert(n.clone());
                    self.aug_targets.insert(n.clone());
                } else {
                    self.target(target);
                }
            }
            StmtKind::AnnAssign { target, value, .. } => {
                // Local annotations are never evaluated.
                if let Some(v) = value {
                    self.expr(v, &empty, false);
                    self.target(target);
                }
            }
            StmtKind::For { target, iter, .. } => {
                self.expr(iter, &empty, false);
                self.target(target);
            }
            StmtKind::Del(targets) => {
                for t in targets {
                    if let ExprKind::Name(n) = &t.kind {
                        self.uses.insert(n.clone());
                        self.defs.insert(n.clone());
                        self.aug_targets.insert(n.clone());
                    } else {
                        self.pure = false;
                        self.expr(t, &empty, false);
                    }
                }
            }
            StmtKind::Global(_) | StmtKind::Nonlocal(_) => self.pure = false,
            StmtKind::Import(aliases) | StmtKind::ImportFrom { names: aliases, .. } => {
                self.pure = false;
                for a in aliases {
                    if a.name != "*" {
                        self.defs.insert(a.bound_name().to_string());
                    }
                }
            }
            StmtKind::FunctionDef { name, .. } | StmtKind::ClassDef { name, .. } => {
                self.pure = false;
                for e in header_exprs(s) {
                    self.expr(e, &empty, false);
                }
                self.defs.insert(name.id.clone());
            }
            StmtKind::With { .. } | StmtKind::Try { .. } => {
                self.pure = false;
                for e in header_exprs(s) {
                    self.expr(e, &empty, false);
                }
            }
            _ => {
                for e in header_exprs(s) {
                    self.expr(e, &empty, false);
                }
            }
        }
    }

    fn target(&mut self, t: &Expr) {
        let empty = BTreeSet::new();
        match &t.kind {
            ExprKind::Name(n) => {
                self.defs.insert(n.clone());
            }
            ExprKind::Tuple(items) | ExprKind::List(items) => {
                for it in items {
                    self.target(it);
                }
            }
            ExprKind::Starred(inner) => self.target(inner),
            _ => {
                // Subscript or attribute store mutates an object.
                self.pure = false;
                self.expr(t, &empty, false);
            }
        }
    }

    /// Records free names of `e`, treating `bound` as names local to an
    /// enclosing lambda or comprehension.
    fn expr(&mut self, e: &Expr, bound: &BTreeSet<String>, in_lambda: bool) {
        match &e.kind {
            ExprKind::Name(n) => {
                if !bound.contains(n) {
                    self.uses.insert(n.clone());
                    if in_lambda {
                        self.lambda_uses.insert(n.clone());
                    }
                }
            }
            ExprKind::Call { func, .. } => {
                let whitelisted =
                    matches!(&func.kind, ExprKind::Name(n) if PURE_CALLS.contains(&n.as_str()) && !bound.contains(n));
                if !whitelisted {
                    self.pure = false;
                }
                for c in child_exprs(e) {
                    self.expr(c, bound, in_lambda);
                }
            }
            ExprKind::Yield(_) | ExprKind::YieldFrom(_) | ExprKind::Await(_) => {
                self.pure = false;
                for c in child_exprs(e) {
                    self.expr(c, bound, in_lambda);
                }
            }
            ExprKind::Lambda { params, body } => {
                for p in params {
                    if let Some(d) = &p.default {
                        self.expr(d, bound, in_lambda);
                    }
                }
                let mut inner = bound.clone();
                inner.extend(params.iter().map(|p| p.name.id.clone()));
                self.expr(body, &inner, true);
            }
            ExprKind::Comp { elt, value, generators, .. } => {
                let mut inner = bound.clone();
                for (i, g) in generators.iter().enumerate() {
                    self.expr(&g.iter, if i == 0 { bound } else { &inner }, in_lambda);
                    let mut names = Vec::new();
                    target_names(&g.target, &mut names);
                    inner.extend(names);
                    for c in &g.ifs {
                        self.expr(c, &inner, in_lambda);
                    }
                }
                self.expr(elt, &inner, in_lambda);
                if let Some(v) = value {
                    self.expr(v, &inner, in_lambda);
                }
            }
            ExprKind::NamedExpr { target, value } => {
                self.expr(value, bound, in_lambda);
                self.defs.insert(target.id.clone());
            }
            _ => {
                for c in child_exprs(e) {
                    self.expr(c, bound, in_lambda);
                }
            }
        }
    }
}

pub(crate) fn target_names(t: &Expr, out: &mut Vec<String>) {
    match &t.kind {
        ExprKind::Name(n) => out.push(n.clone()),
        ExprKind::Tuple(items) | ExprKind::List(items) => {
            for it in items {
                target_names(it, out);
            }
        }
        ExprKind::Starred(inner) => target_names(inner, out),
        _ => {}
    }
}

/// Reaching definitions at statement granularity. Definition sites are
/// statement indices; index 0 stands for the function entry (parameters and
/// the "unbound" state of every other local).
#[derive(Debug, Clone)]
pub struct ReachingDefs {
    /// For each statement index, variable -> set of definition sites
    /// reaching the statement's entry.
    pub reach_in: BTreeMap<usize, BTreeMap<String, BTreeSet<usize>>>,
}

impl ReachingDefs {
    pub fn compute(infos: &[StatementInfo], graph: &StmtGraph) -> ReachingDefs {
        let vars: BTreeSet<String> = infos.iter().flat_map(|i| i.defs.iter().chain(i.uses.iter()).cloned()).collect();
        let entry_state: BTreeMap<String, BTreeSet<usize>> =
            vars.iter().map(|v| (v.clone(), BTreeSet::from([0usize]))).collect();
        let by_index: BTreeMap<usize, &StatementInfo> = infos.iter().map(|i| (i.index, i)).collect();

        let mut reach_in: BTreeMap<usize, BTreeMap<String, BTreeSet<usize>>> = BTreeMap::new();
        let mut reach_out: BTreeMap<usize, BTreeMap<String, BTreeSet<usize>>> = BTreeMap::new();
        let nodes: Vec<usize> = graph.statements().collect();
        let mut changed = true;
        while changed {
            changed = false;
            for &n in &nodes {
                let mut inn: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
                for p in graph.preds(n) {
                    let src = if p == 0 { Some(&entry_state) } else { reach_out.get(&p) };
                    if let Some(m) = src {
                        for (v, ds) in m {
                            inn.entry(v.clone()).or_default().extend(ds.iter().copied());
                        }
                    }
                }
                let mut out = inn.clone();
                if let Some(info) = by_index.get(&n) {
                    for d in &info.defs {
                        out.insert(d.clone(), BTreeSet::from([n]));
                    }
                }
                if reach_in.get(&n) != Some(&inn) {
                    reach_in.insert(n, inn);
                    changed = true;
                }
                if reach_out.get(&n) != Some(&out) {
                    reach_out.insert(n, out);
                    changed = true;
                }
            }
        }
        ReachingDefs { reach_in }
    }

    pub fn reaching(&self, stmt: usize, var: &str) -> BTreeSet<usize> {
        self.reach_in.get(&stmt).and_then(|m| m.get(var)).cloned().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse;

    fn infos(body: &str) -> Vec<StatementInfo> {
        let src = format!("def f(a, b, x, v, xs):\n{}", indent(body));
        def_use_sets(&parse(&src, "f").unwrap())
    }

    fn indent(body: &str) -> String {
        body.lines().map(|l| format!("    {l}\n")).collect()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_assignment() {
        let i = &infos("v = a + b")[0];
        assert_eq!(i.defs, set(&["v"]));
        assert_eq!(i.uses, set(&["a", "b"]));
        assert!(i.is_pure);
    }

    #[test]
    fn augmented_assignment_reads_and_writes() {
        let i = &infos("v += 1")[0];
        assert_eq!(i.defs, set(&["v"]));
        assert_eq!(i.uses, set(&["v"]));
    }

    #[test]
    fn pure_read() {
        let i = &infos("return x")[0];
        assert!(i.defs.is_empty());
        assert_eq!(i.uses, set(&["x"]));
    }

    #[test]
    fn comprehension_and_lambda_locals_are_not_uses() {
        let i = &infos("ys = [y + a for y in xs if y > b]")[0];
        assert_eq!(i.uses, set(&["a", "b", "xs"]));
        let i = &infos("k = sorted(xs, key=lambda t: t * a)")[0];
        assert_eq!(i.uses, set(&["sorted", "xs", "a"]));
        assert_eq!(i.lambda_uses, set(&["a"]));
        assert!(!i.is_pure);
    }

    #[test]
    fn purity_policy() {
        let all = infos("n = len(xs)\nm = max(a, b)\nxs.append(1)\nxs[0] = 1\ny = print(a)\nz = abs(x) + ord('a')");
        let pure: Vec<bool> = all.iter().map(|i| i.is_pure).collect();
        assert_eq!(pure, vec![true, true, false, false, false, true]);
    }

    #[test]
    fn compound_headers_are_units_and_bodies_recurse() {
        let all = infos("for i in xs:\n    if i > a:\n        v = i\n    else:\n        v = 0\nreturn v");
        let kinds: Vec<&str> = all.iter().map(|i| i.kind).collect();
        assert_eq!(kinds, vec!["for", "if", "assign", "assign", "return"]);
        assert_eq!(all[0].defs, set(&["i"]));
        assert_eq!(all[0].uses, set(&["xs"]));
        assert_eq!(all[1].uses, set(&["i", "a"]));
        assert_eq!(all.iter().map(|i| i.index).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn defs_and_uses_occur_inside_span() {
        let src = "def f(a, xs):\n    total = 0\n    for i in xs:\n        total += i * a\n    return total\n";
        let p = parse(src, "f").unwrap();
        for info in def_use_sets(&p) {
            let text = &src[info.span.start..info.span.end];
            for n in info.defs.iter().chain(info.uses.iter()) {
                assert!(text.contains(n.as_str()), "{n} not in {text}");
            }
        }
    }

    #[test]
    fn reaching_definitions_through_branches_and_loops() {
        let src = "def f(a):\n    v = 1\n    if a:\n        v = 2\n    w = v\n    while a:\n        u = w\n        w = 3\n    return w\n";
        let p = parse(src, "f").unwrap();
        let info = def_use_sets(&p);
        let graph = StmtGraph::build(&p).unwrap();
        let rd = ReachingDefs::compute(&info, &graph);
        // statements: 1 v=1, 2 if, 3 v=2, 4 w=v, 5 while, 6 u=w, 7 w=3, 8 return
        assert_eq!(rd.reaching(4, "v"), BTreeSet::from([1, 3]));
        assert_eq!(rd.reaching(6, "w"), BTreeSet::from([4, 7]));
        assert_eq!(rd.reaching(8, "w"), BTreeSet::from([4, 7]));
        assert_eq!(rd.reaching(2, "a"), BTreeSet::from([0]));
    }
}
