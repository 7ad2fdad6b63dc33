//! Control-flow graph of the entry function.
//!
//! Basic blocks hold maximal runs of simple statements; `if` tests become
//! `Cond` nodes and loop headers `Loop` nodes. Node labels use the canonical
//! name numbering so that consistently renamed programs produce identical
//! labels.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use super::ast::*;
use super::defuse::number_statements;
use super::digest::canonical_namer;
use super::{check_supported, ModelError, SubjectProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum NodeKind {
    Entry,
    Exit,
    Block,
    Cond,
    Loop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Branch {
    Fallthrough,
    True,
    False,
    LoopBack,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CfgNode {
    pub id: usize,
    pub kind: NodeKind,
    /// Statement indices as numbered by `def_use_sets`.
    pub statements: Vec<usize>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CfgEdge {
    pub from: usize,
    pub to: usize,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cfg {
    pub nodes: Vec<CfgNode>,
    pub edges: Vec<CfgEdge>,
    pub entry: usize,
    pub exit: usize,
}

impl Cfg {
    pub fn node(&self, id: usize) -> &CfgNode {
        &self.nodes[id]
    }

    pub fn successors(&self, id: usize) -> impl Iterator<Item = &CfgEdge> {
        self.edges.iter().filter(move |e| e.from == id)
    }

    pub fn predecessors(&self, id: usize) -> impl Iterator<Item = &CfgEdge> {
        self.edges.iter().filter(move |e| e.to == id)
    }
}

type Pending = Vec<(usize, Branch)>;

struct LoopCtx {
    header: usize,
    breaks: Pending,
}

struct Builder<'a> {
    nodes: Vec<CfgNode>,
    edges: Vec<CfgEdge>,
    numbering: HashMap<*const Stmt, usize>,
    render: Renderer<'a>,
    loops: Vec<LoopCtx>,
    exit_edges: Pending,
}

impl<'a> Builder<'a> {
    fn node(&mut self, kind: NodeKind, label: String) -> usize {
        let id = self.nodes.len();
        self.nodes.push(CfgNode { id, kind, statements: Vec::new(), label });
        id
    }

    fn connect(&mut self, preds: &Pending, to: usize) {
        for &(from, branch) in preds {
            self.edges.push(CfgEdge { from, to, branch });
        }
    }

    /// Lays out `stmts` after the dangling edges `preds`; returns the
    /// dangling edges leaving the sequence.
    fn seq(&mut self, stmts: &[Stmt], mut preds: Pending) -> Pending {
        let mut open: Option<usize> = None;
        for s in stmts {
            let index = self.numbering[&(s as *const Stmt)];
            if !s.kind.is_compound() {
                let block = match open {
                    Some(b) => b,
                    None => {
                        let b = self.node(NodeKind::Block, String::new());
                        self.connect(&preds, b);
                        preds = vec![(b, Branch::Fallthrough)];
                        open = Some(b);
                        b
                    }
                };
                let text = self.render.header(s);
                let n = &mut self.nodes[block];
                n.statements.push(index);
                if !n.label.is_empty() {
                    n.label.push('\n');
                }
                n.label.push_str(&text);
                match &s.kind {
                    StmtKind::Return(_) | StmtKind::Raise { .. } => {
                        self.exit_edges.push((block, Branch::Fallthrough));
                        preds.clear();
                        open = None;
                    }
                    StmtKind::Break => {
                        if let Some(l) = self.loops.last_mut() {
                            l.breaks.push((block, Branch::Fallthrough));
                        }
                        preds.clear();
                        open = None;
                    }
                    StmtKind::Continue => {
                        if let Some(h) = self.loops.last().map(|l| l.header) {
                            self.edges.push(CfgEdge { from: block, to: h, branch: Branch::LoopBack });
                        }
                        preds.clear();
                        open = None;
                    }
                    _ => {}
                }
                continue;
            }
            open = None;
            preds = match &s.kind {
                StmtKind::If { test, body, orelse, .. } => {
                    let c = self.node(NodeKind::Cond, self.render.expr(test));
                    self.nodes[c].statements.push(index);
                    self.connect(&preds, c);
                    let mut out = self.seq(&body.stmts, vec![(c, Branch::True)]);
                    match orelse {
                        Some(o) => out.extend(self.seq(&o.stmts, vec![(c, Branch::False)])),
                        None => out.push((c, Branch::False)),
                    }
                    out
                }
                StmtKind::While { test, body, orelse } => {
                    let label = format!("while {}", self.render.expr(test));
                    self.lay_loop(label, index, preds, body, orelse.as_ref())
                }
                StmtKind::For { target, iter, body, orelse, .. } => {
                    let label = format!("for {} in {}", self.render.expr(target), self.render.expr(iter));
                    self.lay_loop(label, index, preds, body, orelse.as_ref())
                }
                _ => unreachable!("unsupported constructs are rejected before layout"),
            };
        }
        preds
    }

    fn lay_loop(
        &mut self,
        label: String,
        index: usize,
        preds: Pending,
        body: &Suite,
        orelse: Option<&Suite>,
    ) -> Pending {
        let h = self.node(NodeKind::Loop, label);
        self.nodes[h].statements.push(index);
        self.connect(&preds, h);
        self.loops.push(LoopCtx { header: h, breaks: Vec::new() });
        let body_out = self.seq(&body.stmts, vec![(h, Branch::True)]);
        for (from, branch) in body_out {
            let branch = if branch == Branch::Fallthrough { Branch::LoopBack } else { branch };
            self.edges.push(CfgEdge { from, to: h, branch });
        }
        let ctx = self.loops.pop().expect("loop context");
        let mut out = match orelse {
            Some(o) => self.seq(&o.stmts, vec![(h, Branch::False)]),
            None => vec![(h, Branch::False)],
        };
        out.extend(ctx.breaks);
        out
    }
}

/// Builds the CFG of the entry function. Fails for constructs outside the
/// supported subset.
pub fn build_cfg(program: &SubjectProgram) -> Result<Cfg, ModelError> {
    check_supported(program)?;
    let namer = canonical_namer(program);
    let render = Renderer { rename: &namer };
    let header = match &program.entry_function().kind {
        StmtKind::FunctionDef { params, .. } => format!("entry({})", render.params(params)),
        _ => unreachable!(),
    };
    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
        numbering: number_statements(program.entry_body()),
        render,
        loops: Vec::new(),
        exit_edges: Vec::new(),
    };
    let entry = b.node(NodeKind::Entry, header);
    let exit = b.node(NodeKind::Exit, "exit".into());
    let mut dangling = b.seq(program.entry_body(), vec![(entry, Branch::Fallthrough)]);
    dangling.extend(std::mem::take(&mut b.exit_edges));
    b.connect(&dangling, exit);
    Ok(prune(b.nodes, b.edges, entry, exit))
}

/// Drops nodes unreachable from the entry (the exit is always kept) and
/// renumbers the survivors in creation order.
fn prune(nodes: Vec<CfgNode>, edges: Vec<CfgEdge>, entry: usize, exit: usize) -> Cfg {
    let mut reach = BTreeSet::from([entry, exit]);
    let mut queue = VecDeque::from([entry]);
    while let Some(n) = queue.pop_front() {
        for e in edges.iter().filter(|e| e.from == n) {
            if reach.insert(e.to) {
                queue.push_back(e.to);
            }
        }
    }
    let remap: BTreeMap<usize, usize> = reach.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let nodes = nodes
        .into_iter()
        .filter(|n| reach.contains(&n.id))
        .map(|mut n| {
            n.id = remap[&n.id];
            n
        })
        .collect();
    let edges = edges
        .into_iter()
        .filter(|e| reach.contains(&e.from) && reach.contains(&e.to))
        .map(|e| CfgEdge { from: remap[&e.from], to: remap[&e.to], branch: e.branch })
        .collect();
    Cfg { nodes, edges, entry: remap[&entry], exit: remap[&exit] }
}

/// Label-preserving isomorphism check. Out-edge labels are unique per node,
/// so a simultaneous walk from both entries determines the only candidate
/// mapping.
pub fn cfg_equivalent(a: &Cfg, b: &Cfg) -> bool {
    if a.nodes.len() != b.nodes.len() || a.edges.len() != b.edges.len() {
        return false;
    }
    let out = |g: &Cfg, n: usize| -> Option<BTreeMap<Branch, usize>> {
        let mut m = BTreeMap::new();
        for e in g.successors(n) {
            if m.insert(e.branch, e.to).is_some() {
                return None;
            }
        }
        Some(m)
    };
    let mut fwd: HashMap<usize, usize> = HashMap::new();
    let mut bwd: HashMap<usize, usize> = HashMap::new();
    let mut queue = VecDeque::from([(a.entry, b.entry)]);
    fwd.insert(a.entry, b.entry);
    bwd.insert(b.entry, a.entry);
    while let Some((x, y)) = queue.pop_front() {
        let (nx, ny) = (a.node(x), b.node(y));
        if nx.kind != ny.kind || nx.label != ny.label {
            return false;
        }
        let (Some(ox), Some(oy)) = (out(a, x), out(b, y)) else {
            return false;
        };
        if ox.keys().ne(oy.keys()) {
            return false;
        }
        for (branch, tx) in ox {
            let ty = oy[&branch];
            match (fwd.get(&tx), bwd.get(&ty)) {
                (None, None) => {
                    fwd.insert(tx, ty);
                    bwd.insert(ty, tx);
                    queue.push_back((tx, ty));
                }
                (Some(&m), Some(&n)) if m == ty && n == tx => {}
                _ => return false,
            }
        }
    }
    // The exit may be unreachable (non-terminating loop); it is the only
    // node allowed to stay unmapped.
    let a_exit = fwd.contains_key(&a.exit);
    a_exit == bwd.contains_key(&b.exit) && fwd.len() + usize::from(!a_exit) == a.nodes.len()
}

/// Statement-level flow graph derived from the CFG; node 0 is the function
/// entry.
#[derive(Debug, Clone)]
pub struct StmtGraph {
    preds: BTreeMap<usize, BTreeSet<usize>>,
}

impl StmtGraph {
    pub fn build(program: &SubjectProgram) -> Result<StmtGraph, ModelError> {
        Ok(StmtGraph::from_cfg(&build_cfg(program)?))
    }

    pub fn from_cfg(cfg: &Cfg) -> StmtGraph {
        let mut preds: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        let last = |n: &CfgNode| -> Option<usize> {
            match n.kind {
                NodeKind::Entry => Some(0),
                _ => n.statements.last().copied(),
            }
        };
        for n in &cfg.nodes {
            for w in n.statements.windows(2) {
                preds.entry(w[1]).or_default().insert(w[0]);
            }
            if let Some(&first) = n.statements.first() {
                let entry = preds.entry(first).or_default();
                for e in cfg.predecessors(n.id) {
                    if let Some(p) = last(cfg.node(e.from)) {
                        entry.insert(p);
                    }
                }
            }
        }
        StmtGraph { preds }
    }

    /// Reachable statements in ascending index order.
    pub fn statements(&self) -> impl Iterator<Item = usize> + '_ {
        self.preds.keys().copied()
    }

    pub fn preds(&self, stmt: usize) -> impl Iterator<Item = usize> + '_ {
        self.preds.get(&stmt).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn contains(&self, stmt: usize) -> bool {
        self.preds.contains_key(&stmt)
    }
}
