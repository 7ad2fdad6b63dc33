//! Concept-oriented, semantics-preserving program perturbations.
//!
//! Each concept has an eligibility analysis (`enumerate_sites`) and a
//! deterministic transformation (`apply`). Transformations edit the original
//! text through spans, so formatting and comments outside the touched region
//! survive unchanged.

mod rename;
pub mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::ast::{header_exprs, walk_stmts, ExprKind, Stmt, StmtKind, Suite};
use crate::model::cfg::StmtGraph;
use crate::model::defuse::ReachingDefs;
use crate::model::scope::ScopeKind;
use crate::model::{check_supported, def_use_sets, Span, StatementInfo, SubjectProgram};

pub use rename::{fresh_name, fresh_names, rename_program};
use text::{column, line_end_inclusive, line_number, line_start, occupies_own_lines, splice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Concept {
    IfElseFlip,
    DefUseBreak,
    IndependentSwap,
    NameRandom,
    NameShuffle,
}

impl Concept {
    pub const ALL: [Concept; 5] = [
        Concept::IfElseFlip,
        Concept::DefUseBreak,
        Concept::IndependentSwap,
        Concept::NameRandom,
        Concept::NameShuffle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Concept::IfElseFlip => "IfElseFlip",
            Concept::DefUseBreak => "DefUseBreak",
            Concept::IndependentSwap => "IndependentSwap",
            Concept::NameRandom => "NameRandom",
            Concept::NameShuffle => "NameShuffle",
        }
    }

    /// Renaming concepts keep the program α-equivalent to the original.
    pub fn is_renaming(self) -> bool {
        matches!(self, Concept::NameRandom | Concept::NameShuffle)
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown concept `{0}`")]
pub struct UnknownConcept(pub String);

impl FromStr for Concept {
    type Err = UnknownConcept;

    /// Accepts `IfElseFlip`, `if-else-flip`, `if_else_flip` and so on.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_lowercase();
        Concept::ALL
            .into_iter()
            .find(|c| c.as_str().to_ascii_lowercase() == key)
            .ok_or_else(|| UnknownConcept(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Statement(usize),
    Pair(usize, usize),
    Identifiers(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSite {
    pub concept: Concept,
    pub anchor: Anchor,
    /// Program elements the perturbation touches.
    pub elements: Vec<String>,
    /// Human-readable description, used as prompt static information.
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterfactualCandidate {
    pub concept: Concept,
    pub source: String,
    /// `None` for generator outputs not tied to an enumerated site.
    pub site: Option<PerturbationSite>,
    /// Statement indices rewritten by the transformation.
    pub impact_region: BTreeSet<usize>,
    pub rename_map: Option<BTreeMap<String, String>>,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PerturbError {
    #[error("site not applicable: {0}")]
    NotApplicable(String),
}

/// Statements of the entry function in pre-order; index `i` is at `i - 1`.
fn statements(program: &SubjectProgram) -> Vec<&Stmt> {
    let mut out = Vec::new();
    walk_stmts(program.entry_body(), &mut |s| out.push(s));
    out
}

/// Every statement index inside the given suites, recursively.
fn indices_in(suites: &[&Suite], all: &[&Stmt]) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for suite in suites {
        walk_stmts(&suite.stmts, &mut |s| {
            if let Some(i) = all.iter().position(|x| std::ptr::eq(*x, s)) {
                out.insert(i + 1);
            }
        });
    }
    out
}

fn snippet(src: &str, span: Span) -> String {
    let text = &src[span.start..span.end];
    let first = text.lines().next().unwrap_or("").trim_end();
    if first.len() < text.trim_end().len() {
        format!("{first} ...")
    } else {
        first.to_string()
    }
}

/// Returns exactly the eligible sites of `concept` in the entry function.
/// Programs outside the supported subset have no sites.
pub fn enumerate_sites(program: &SubjectProgram, concept: Concept) -> Vec<PerturbationSite> {
    if check_supported(program).is_err() {
        return Vec::new();
    }
    match concept {
        Concept::IfElseFlip => flip_sites(program).into_iter().map(|f| f.site).collect(),
        Concept::DefUseBreak => def_use_sites(program).into_iter().map(|d| d.site).collect(),
        Concept::IndependentSwap => swap_sites(program),
        Concept::NameRandom | Concept::NameShuffle => {
            let names = program.renameable_names();
            let needed = if concept == Concept::NameRandom { 1 } else { 2 };
            if names.len() < needed {
                return Vec::new();
            }
            let notes = match concept {
                Concept::NameRandom => format!(
                    "renameable identifiers: {}; each can be replaced by a fresh, unused name",
                    names.join(", ")
                ),
                _ => format!(
                    "renameable identifiers: {}; pairs of them can exchange names consistently",
                    names.join(", ")
                ),
            };
            vec![PerturbationSite { concept, anchor: Anchor::Identifiers(names.clone()), elements: names, notes }]
        }
    }
}

/// Applies `site` to `program`. `seed` fixes every random choice.
pub fn apply(
    program: &SubjectProgram,
    site: &PerturbationSite,
    seed: u64,
) -> Result<CounterfactualCandidate, PerturbError> {
    if !enumerate_sites(program, site.concept).contains(site) {
        return Err(PerturbError::NotApplicable(format!("{} site is not eligible in this program", site.concept)));
    }
    let (source, impact_region, rename_map) = match site.concept {
        Concept::IfElseFlip => {
            let flip = flip_sites(program).into_iter().find(|f| &f.site == site).expect("site checked above");
            (flip.apply(program.source()), flip.impact, None)
        }
        Concept::DefUseBreak => {
            let d = def_use_sites(program).into_iter().find(|d| &d.site == site).expect("site checked above");
            let fresh = fresh_name(program, seed);
            let src = program.source();
            let indent = &src[line_start(src, d.def_span.start)..d.def_span.start];
            let mut insert_at = line_end_inclusive(src, d.def_span.end);
            let mut line = format!("{indent}{fresh} = {}\n", d.var);
            if !src[..insert_at].ends_with('\n') {
                line.insert(0, '\n');
                line.pop();
                insert_at = src.len();
            }
            let mut edits: Vec<(Span, String)> = d.use_spans.iter().map(|s| (*s, fresh.clone())).collect();
            edits.push((Span::new(insert_at, insert_at), line));
            let map = BTreeMap::from([(d.var.clone(), fresh)]);
            (splice(src, edits), d.uses, Some(map))
        }
        Concept::IndependentSwap => {
            let Anchor::Pair(a, b) = site.anchor else { unreachable!() };
            let all = statements(program);
            let (sa, sb) = (all[a - 1].span, all[b - 1].span);
            let src = program.source();
            let edits = vec![(sa, src[sb.start..sb.end].to_string()), (sb, src[sa.start..sa.end].to_string())];
            (splice(src, edits), BTreeSet::from([a, b]), None)
        }
        Concept::NameRandom => {
            let names = program.renameable_names();
            let map: BTreeMap<String, String> =
                names.iter().cloned().zip(fresh_names(program, names.len(), seed)).collect();
            let (src, impact) = rename_program(program, &map);
            (src, impact, Some(map))
        }
        Concept::NameShuffle => {
            let map = rename::shuffle_map(&program.renameable_names(), seed);
            let (src, impact) = rename_program(program, &map);
            (src, impact, Some(map))
        }
    };
    if program.reparse(&source).is_err() {
        return Err(PerturbError::NotApplicable(format!("{} produced text that does not parse", site.concept)));
    }
    Ok(CounterfactualCandidate {
        concept: site.concept,
        source,
        site: Some(site.clone()),
        impact_region,
        rename_map,
        attempt: 1,
    })
}

struct FlipSite {
    site: PerturbationSite,
    test: Span,
    /// Regions holding the two branch bodies; `then` precedes `orelse`.
    then: Span,
    orelse: Span,
    impact: BTreeSet<usize>,
}

impl FlipSite {
    fn apply(&self, src: &str) -> String {
        let mut then_text = src[self.then.start..self.then.end].to_string();
        let mut else_text = src[self.orelse.start..self.orelse.end].to_string();
        // A block body that ends the file may lack its final newline.
        if then_text.ends_with('\n') && !else_text.ends_with('\n') {
            else_text.push('\n');
            then_text.pop();
        }
        let test = &src[self.test.start..self.test.end];
        splice(src, vec![(self.test, format!("not ({test})")), (self.then, else_text), (self.orelse, then_text)])
    }
}

fn flip_sites(program: &SubjectProgram) -> Vec<FlipSite> {
    let src = program.source();
    let all = statements(program);
    let mut out = Vec::new();
    for (i, s) in all.iter().enumerate() {
        let StmtKind::If { test, body, orelse: Some(orelse), is_elif: false, else_kw: Some(else_kw) } = &s.kind else {
            continue;
        };
        let (then, other) = match (body.inline, orelse.inline) {
            (true, true) => (body.span(), orelse.span()),
            (false, false) => {
                let first_then = body.stmts[0].span.start;
                let first_else = orelse.stmts[0].span.start;
                if column(src, first_then) != column(src, first_else) {
                    continue;
                }
                (
                    Span::new(line_start(src, first_then), line_start(src, else_kw.start)),
                    Span::new(line_start(src, first_else), line_end_inclusive(src, orelse.span().end)),
                )
            }
            _ => continue,
        };
        let line = line_number(src, s.span.start);
        let site = PerturbationSite {
            concept: Concept::IfElseFlip,
            anchor: Anchor::Statement(i + 1),
            elements: vec![src[test.span.start..test.span.end].to_string(), "if-branch".into(), "else-branch".into()],
            notes: format!(
                "line {line}: `if {}:` has an explicit else branch; the branches are exclusive, so negating the condition and swapping the two bodies keeps behavior",
                snippet(src, test.span)
            ),
        };
        out.push(FlipSite { site, test: test.span, then, orelse: other, impact: indices_in(&[body, orelse], &all) });
    }
    out
}

struct DefUseSite {
    site: PerturbationSite,
    var: String,
    def_span: Span,
    uses: BTreeSet<usize>,
    use_spans: Vec<Span>,
}

fn def_use_sites(program: &SubjectProgram) -> Vec<DefUseSite> {
    let Ok(graph) = StmtGraph::build(program) else {
        return Vec::new();
    };
    let src = program.source();
    let infos = def_use_sets(program);
    let rd = ReachingDefs::compute(&infos, &graph);
    let all = statements(program);
    let names = program.names();
    let mut out = Vec::new();
    for info in &infos {
        let stmt = all[info.index - 1];
        let simple_def = matches!(
            &stmt.kind,
            StmtKind::Assign { .. } | StmtKind::AugAssign { .. } | StmtKind::AnnAssign { value: Some(_), .. }
        );
        if !simple_def || !graph.contains(info.index) || !occupies_own_lines(src, stmt.span) {
            continue;
        }
        for var in &info.defs {
            if names.declared_global.contains(var) {
                continue;
            }
            let chain: Vec<&StatementInfo> = infos
                .iter()
                .filter(|j| j.uses.contains(var) && rd.reaching(j.index, var).contains(&info.index))
                .collect();
            let sound = !chain.is_empty()
                && chain.iter().all(|j| {
                    rd.reaching(j.index, var) == BTreeSet::from([info.index])
                        && !j.aug_targets.contains(var)
                        && !j.lambda_uses.contains(var)
                });
            if !sound {
                continue;
            }
            let mut use_spans = Vec::new();
            for j in &chain {
                use_spans.extend(local_reads(program, all[j.index - 1], var));
            }
            if use_spans.is_empty() {
                continue;
            }
            let lines: Vec<String> = chain.iter().map(|j| line_number(src, j.span.start).to_string()).collect();
            let site = PerturbationSite {
                concept: Concept::DefUseBreak,
                anchor: Anchor::Statement(info.index),
                elements: vec![var.clone()],
                notes: format!(
                    "line {}: `{}` defines `{var}`, the only definition reaching its uses on line(s) {}; a copy of `{var}` in a new variable can carry those uses",
                    line_number(src, stmt.span.start),
                    snippet(src, stmt.span),
                    lines.join(", ")
                ),
            };
            let uses = chain.iter().map(|j| j.index).collect();
            out.push(DefUseSite { site, var: var.clone(), def_span: stmt.span, uses, use_spans });
        }
    }
    out
}

/// Spans of reads of the function-local `var` in the header of `stmt`.
fn local_reads(program: &SubjectProgram, stmt: &Stmt, var: &str) -> Vec<Span> {
    let names = program.names();
    let regions: Vec<Span> = header_exprs(stmt).iter().map(|e| e.span).collect();
    names
        .occurrences
        .iter()
        .filter(|o| o.name == var && !o.binding && regions.iter().any(|r| r.contains(o.span)))
        .filter(|o| names.resolve(o).is_some_and(|s| names.scopes[s].kind == ScopeKind::Function))
        .map(|o| o.span)
        .collect()
}

fn swap_sites(program: &SubjectProgram) -> Vec<PerturbationSite> {
    let src = program.source();
    let infos = def_use_sets(program);
    let all = statements(program);
    let swappable = |i: &StatementInfo| {
        let s = all[i.index - 1];
        let excluded = match &s.kind {
            StmtKind::Expr(e) => matches!(e.kind, ExprKind::Constant(_) | ExprKind::FString { .. }),
            StmtKind::Assign { .. } | StmtKind::AugAssign { .. } | StmtKind::AnnAssign { .. } => false,
            _ => true,
        };
        i.is_pure && !i.compound && !excluded
    };
    let mut out = Vec::new();
    for pair in infos.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.suite != b.suite || b.position != a.position + 1 || !swappable(a) || !swappable(b) {
            continue;
        }
        let independent = a.defs.is_disjoint(&b.defs) && a.uses.is_disjoint(&b.defs) && a.defs.is_disjoint(&b.uses);
        let (ta, tb) = (&src[a.span.start..a.span.end], &src[b.span.start..b.span.end]);
        if !independent || ta == tb {
            continue;
        }
        out.push(PerturbationSite {
            concept: Concept::IndependentSwap,
            anchor: Anchor::Pair(a.index, b.index),
            elements: vec![ta.to_string(), tb.to_string()],
            notes: format!(
                "lines {} and {}: `{}` and `{}` are adjacent and independent (neither reads or overwrites what the other defines), so their order can be exchanged",
                line_number(src, a.span.start),
                line_number(src, b.span.start),
                snippet(src, a.span),
                snippet(src, b.span)
            ),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse;

    fn program(body: &str) -> SubjectProgram {
        let src = format!("def f(x, a, b):\n{}", body.lines().map(|l| format!("    {l}\n")).collect::<String>());
        parse(&src, "f").unwrap()
    }

    fn body_of(src: &str) -> String {
        src.lines().skip(1).map(|l| l.strip_prefix("    ").unwrap_or(l)).collect::<Vec<_>>().join("\n")
    }

    fn only_site(p: &SubjectProgram, c: Concept) -> PerturbationSite {
        let sites = enumerate_sites(p, c);
        assert_eq!(sites.len(), 1, "{sites:?}");
        sites.into_iter().next().unwrap()
    }

    #[test]
    fn concept_names_parse_in_several_spellings() {
        assert_eq!("if-else-flip".parse::<Concept>().unwrap(), Concept::IfElseFlip);
        assert_eq!("NameShuffle".parse::<Concept>().unwrap(), Concept::NameShuffle);
        assert_eq!("def_use_break".parse::<Concept>().unwrap(), Concept::DefUseBreak);
        assert!("loop-unroll".parse::<Concept>().is_err());
    }

    #[test]
    fn straight_line_has_no_flip_site() {
        assert!(enumerate_sites(&program("y = x + 1\nreturn y"), Concept::IfElseFlip).is_empty());
    }

    #[test]
    fn if_else_flip_negates_and_swaps() {
        let p = program("if x>0:\n    r=1\nelse:\n    r=2\nreturn r");
        let c = apply(&p, &only_site(&p, Concept::IfElseFlip), 0).unwrap();
        assert_eq!(body_of(&c.source), "if not (x>0):\n    r=2\nelse:\n    r=1\nreturn r");
        assert_eq!(c.impact_region, BTreeSet::from([2, 3]));
    }

    #[test]
    fn if_else_flip_handles_inline_bodies_and_end_of_file() {
        let p = parse("def f(x):\n    if x: return 1\n    else: return 2", "f").unwrap();
        let c = apply(&p, &only_site(&p, Concept::IfElseFlip), 0).unwrap();
        assert_eq!(c.source, "def f(x):\n    if not (x): return 2\n    else: return 1");
        let p = parse("def f(x):\n    if x:\n        return 1\n    else:\n        return 2", "f").unwrap();
        let c = apply(&p, &only_site(&p, Concept::IfElseFlip), 0).unwrap();
        assert_eq!(c.source, "def f(x):\n    if not (x):\n        return 2\n    else:\n        return 1");
    }

    #[test]
    fn elif_chains_and_else_less_ifs_are_not_flip_sites() {
        let p = program("if x > 0:\n    return 1\nelif x < 0:\n    return -1\nelse:\n    return 0");
        assert!(enumerate_sites(&p, Concept::IfElseFlip).is_empty());
        let p = program("if x > 0:\n    return 1\nreturn 0");
        assert!(enumerate_sites(&p, Concept::IfElseFlip).is_empty());
    }

    #[test]
    fn def_use_break_reroutes_uses() {
        let p = program("v = a+b\nreturn v*2");
        let c = apply(&p, &only_site(&p, Concept::DefUseBreak), 0).unwrap();
        assert_eq!(body_of(&c.source), "v = a+b\npcv_0 = v\nreturn pcv_0*2");
        assert_eq!(c.impact_region, BTreeSet::from([2]));
        assert_eq!(c.rename_map.unwrap()["v"], "pcv_0");
    }

    #[test]
    fn def_use_break_requires_a_single_reaching_definition() {
        let p = program("v = 1\nif x:\n    v = 2\nreturn v");
        assert!(enumerate_sites(&p, Concept::DefUseBreak).is_empty());
        let p = program("v = 1\nv += x\nreturn v");
        let sites = enumerate_sites(&p, Concept::DefUseBreak);
        // `v = 1` reaches an augmented assignment, so only the second def qualifies.
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].anchor, Anchor::Statement(2));
    }

    #[test]
    fn def_use_break_skips_lambda_uses() {
        let p = program("k = x\nreturn sorted(a, key=lambda t: t * k)");
        assert!(enumerate_sites(&p, Concept::DefUseBreak).is_empty());
    }

    #[test]
    fn independent_swap_examples() {
        let p = program("a = 1\nb = 2\nreturn a+b");
        let site = only_site(&p, Concept::IndependentSwap);
        assert_eq!(site.anchor, Anchor::Pair(1, 2));
        let c = apply(&p, &site, 0).unwrap();
        assert_eq!(body_of(&c.source), "b = 2\na = 1\nreturn a+b");
        let p = program("a = 1\nb = a\nreturn b");
        assert!(enumerate_sites(&p, Concept::IndependentSwap).is_empty());
    }

    #[test]
    fn independent_swap_rejects_impure_statements() {
        let p = program("a = len(x)\nb = print(x)\nreturn a");
        assert!(enumerate_sites(&p, Concept::IndependentSwap).is_empty());
    }

    #[test]
    fn name_random_uses_fresh_names() {
        let p = parse("def f():\n    x = 1\n    return x", "f").unwrap();
        let c = apply(&p, &only_site(&p, Concept::NameRandom), 0).unwrap();
        assert_eq!(c.source, "def f():\n    pcv_0 = 1\n    return pcv_0");
        let c = apply(&p, &only_site(&p, Concept::NameRandom), 1000).unwrap();
        assert_eq!(c.source, "def f():\n    pcv_0_3 = 1\n    return pcv_0_3");
    }

    #[test]
    fn name_shuffle_swaps_selected_pair() {
        let p = parse("def f(x):\n    a = x+1\n    b = x+2\n    return a*b", "f").unwrap();
        let site = only_site(&p, Concept::NameShuffle);
        let want = "def f(x):\n    b = x+1\n    a = x+2\n    return b*a";
        let seed = (0..200u64)
            .find(|s| {
                let m = rename::shuffle_map(&p.renameable_names(), *s);
                m.len() == 2 && m.get("a").map(String::as_str) == Some("b")
            })
            .expect("some seed selects (a, b)");
        assert_eq!(apply(&p, &site, seed).unwrap().source, want);
    }

    #[test]
    fn stale_site_is_not_applicable() {
        let p = program("a = 1\nb = 2\nreturn a+b");
        let site = only_site(&p, Concept::IndependentSwap);
        let other = program("a = 1\nreturn a");
        assert!(matches!(apply(&other, &site, 0), Err(PerturbError::NotApplicable(_))));
    }

    #[test]
    fn unsupported_programs_have_no_sites() {
        let p = program("try:\n    return 1 / x\nexcept ZeroDivisionError:\n    return 0");
        for c in Concept::ALL {
            assert!(enumerate_sites(&p, c).is_empty());
        }
    }
}
