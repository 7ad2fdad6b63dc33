//! Fresh-name generation and whole-program consistent renaming.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::ast::walk_stmts;
use crate::model::lexer::{is_keyword, lexical_tokens, TokKind};
use crate::model::scope::is_builtin;
use crate::model::{Span, SubjectProgram};

use super::text::splice;

/// Every identifier spelled anywhere in the program text or pinned by the
/// harness.
fn taken_names(program: &SubjectProgram) -> BTreeSet<String> {
    let src = program.source();
    let mut taken: BTreeSet<String> = lexical_tokens(src)
        .map(|toks| toks.iter().filter(|t| t.kind == TokKind::Name).map(|t| t.text(src).to_string()).collect())
        .unwrap_or_default();
    taken.extend(program.external_names().iter().cloned());
    taken
}

fn candidate(k: usize, seed: u64) -> String {
    if seed == 0 {
        format!("pcv_{k}")
    } else {
        format!("pcv_{k}_{}", seed % 997)
    }
}

/// `n` distinct fresh identifiers: `pcv_<k>` (or `pcv_<k>_<seed mod 997>`
/// for a nonzero seed) with the smallest non-colliding `k` each.
pub fn fresh_names(program: &SubjectProgram, n: usize, seed: u64) -> Vec<String> {
    let mut taken = taken_names(program);
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    while out.len() < n {
        let name = candidate(k, seed);
        k += 1;
        if taken.contains(&name) || is_keyword(&name) || is_builtin(&name) {
            continue;
        }
        taken.insert(name.clone());
        out.push(name);
    }
    out
}

pub fn fresh_name(program: &SubjectProgram, seed: u64) -> String {
    fresh_names(program, 1, seed).pop().expect("one name requested")
}

/// Seeded disjoint transpositions over `names` (at least one pair).
/// Requires two or more names.
pub fn shuffle_map(names: &[String], seed: u64) -> BTreeMap<String, String> {
    assert!(names.len() >= 2, "a shuffle needs two names");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = names.to_vec();
    pool.shuffle(&mut rng);
    let pairs = 1 + rng.gen_range(0..pool.len() / 2);
    let mut map = BTreeMap::new();
    for p in 0..pairs {
        let (a, b) = (&pool[2 * p], &pool[2 * p + 1]);
        map.insert(a.clone(), b.clone());
        map.insert(b.clone(), a.clone());
    }
    map
}

/// Renames every occurrence of the mapped names. Returns the new text and
/// the entry-function statements whose text changed.
pub fn rename_program(program: &SubjectProgram, map: &BTreeMap<String, String>) -> (String, BTreeSet<usize>) {
    let spans: Vec<(Span, String)> =
        program.names().occurrences.iter().filter_map(|o| map.get(&o.name).map(|to| (o.span, to.clone()))).collect();

    let mut stmt_spans = Vec::new();
    walk_stmts(program.entry_body(), &mut |s| stmt_spans.push(s.span));
    let mut impact = BTreeSet::new();
    for (span, _) in &spans {
        // Pre-order numbering puts the innermost enclosing statement last.
        if let Some(i) = stmt_spans.iter().rposition(|s| s.contains(*span)) {
            impact.insert(i + 1);
        }
    }
    (splice(program.source(), spans), impact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse;

    #[test]
    fn fresh_names_skip_collisions() {
        let p = parse("def f(pcv_0):\n    pcv_2 = pcv_0\n    return pcv_2\n", "f").unwrap();
        assert_eq!(fresh_names(&p, 2, 0), vec!["pcv_1", "pcv_3"]);
        assert_eq!(fresh_name(&p, 5), "pcv_0_5");
    }

    #[test]
    fn shuffle_map_is_an_involution_without_fixed_points() {
        let names: Vec<String> = ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect();
        for seed in 0..50 {
            let m = shuffle_map(&names, seed);
            assert!(m.len() >= 2 && m.len().is_multiple_of(2));
            for (k, v) in &m {
                assert_ne!(k, v);
                assert_eq!(&m[v], k);
            }
            assert_eq!(m, shuffle_map(&names, seed));
        }
    }

    #[test]
    fn rename_reports_impacted_statements() {
        let p = parse("def f(x):\n    y = 1\n    if x:\n        z = x\n    return y\n", "f").unwrap();
        let map = BTreeMap::from([("x".to_string(), "w".to_string())]);
        let (src, impact) = rename_program(&p, &map);
        assert_eq!(src, "def f(w):\n    y = 1\n    if w:\n        z = w\n    return y\n");
        assert_eq!(impact, BTreeSet::from([2, 3]));
    }
}
