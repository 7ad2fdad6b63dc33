//! Property tests over randomly generated programs, metrics and dataset
//! records.

use proptest::prelude::*;

use procure::dataset::diff::covered;
use procure::dataset::{
    annotate_diff, plan_batches, read_records, split_by_task, write_records, CombinedGroup, DatasetRecord,
    OriginalEntry,
};
use procure::metrics::{ccs, pass_at_k, Ccs, PairVerdict};
use procure::model::{build_cfg, cfg_equivalent, structural_digest};
use procure::{parse, Concept, Verdict};

/// A function over four variable slots; rendering picks the slot names.
#[derive(Debug, Clone)]
enum Stmt {
    Assign(usize, Expr),
    AugAdd(usize, Expr),
    If(Expr, Vec<Stmt>, Vec<Stmt>),
    For(usize, Expr, Vec<Stmt>),
}

#[derive(Debug, Clone)]
enum Expr {
    Var(usize),
    Int(u8),
    AddInt(usize, u8),
    Mul(usize, usize),
    Less(usize, u8),
}

fn expr() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0..4usize).prop_map(Expr::Var),
        any::<u8>().prop_map(Expr::Int),
        (0..4usize, any::<u8>()).prop_map(|(v, n)| Expr::AddInt(v, n)),
        (0..4usize, 0..4usize).prop_map(|(a, b)| Expr::Mul(a, b)),
        (0..4usize, any::<u8>()).prop_map(|(v, n)| Expr::Less(v, n)),
    ]
}

fn stmt() -> impl Strategy<Value = Stmt> {
    let leaf = prop_oneof![
        (0..4usize, expr()).prop_map(|(v, e)| Stmt::Assign(v, e)),
        (0..4usize, expr()).prop_map(|(v, e)| Stmt::AugAdd(v, e)),
    ];
    leaf.prop_recursive(2, 12, 3, |inner| {
        prop_oneof![
            (expr(), prop::collection::vec(inner.clone(), 1..3), prop::collection::vec(inner.clone(), 1..3))
                .prop_map(|(c, t, e)| Stmt::If(c, t, e)),
            (0..4usize, expr(), prop::collection::vec(inner, 1..3)).prop_map(|(v, e, b)| Stmt::For(v, e, b)),
        ]
    })
}

fn body() -> impl Strategy<Value = (Vec<Stmt>, usize)> {
    (prop::collection::vec(stmt(), 1..6), 0..4usize)
}

const NAMES_A: [&str; 4] = ["a", "b", "c", "d"];
const NAMES_B: [&str; 4] = ["total", "q_2", "idx", "zz"];

fn render_expr(e: &Expr, n: &[&str; 4]) -> String {
    match e {
        Expr::Var(v) => n[*v].to_string(),
        Expr::Int(i) => i.to_string(),
        Expr::AddInt(v, i) => format!("{} + {i}", n[*v]),
        Expr::Mul(a, b) => format!("{} * {}", n[*a], n[*b]),
        Expr::Less(v, i) => format!("{} < {i}", n[*v]),
    }
}

fn render_block(stmts: &[Stmt], depth: usize, n: &[&str; 4], out: &mut String) {
    let pad = "    ".repeat(depth);
    for s in stmts {
        match s {
            Stmt::Assign(v, e) => out.push_str(&format!("{pad}{} = {}\n", n[*v], render_expr(e, n))),
            Stmt::AugAdd(v, e) => out.push_str(&format!("{pad}{} += {}\n", n[*v], render_expr(e, n))),
            Stmt::If(c, t, e) => {
                out.push_str(&format!("{pad}if {}:\n", render_expr(c, n)));
                render_block(t, depth + 1, n, out);
                out.push_str(&format!("{pad}else:\n"));
                render_block(e, depth + 1, n, out);
            }
            Stmt::For(v, e, b) => {
                out.push_str(&format!("{pad}for {} in range({}):\n", n[*v], render_expr(e, n)));
                render_block(b, depth + 1, n, out);
            }
        }
    }
}

/// Every slot is bound before the body so all four names are locals.
fn render(program: &(Vec<Stmt>, usize), n: &[&str; 4]) -> String {
    let mut out = format!("def f({}):\n    {} = 0\n    {} = 1\n    {} = 2\n", n[0], n[1], n[2], n[3]);
    render_block(&program.0, 1, n, &mut out);
    out.push_str(&format!("    return {}\n", n[program.1]));
    out
}

fn digest_and_cfg(src: &str) -> (procure::model::StructuralDigest, procure::model::Cfg) {
    let p = parse(src, "f").unwrap_or_else(|e| panic!("{e}\n{src}"));
    let cfg = build_cfg(&p).unwrap();
    (structural_digest(&p), cfg)
}

fn record_strategy() -> impl Strategy<Value = DatasetRecord> {
    (
        "[A-Za-z]{1,6}/[0-9]{1,3}",
        0..5usize,
        any::<String>(),
        any::<String>(),
        any::<String>(),
        1..6u32,
        0..6usize,
        "rule|llm:[a-z0-9.-]{1,12}",
    )
        .prop_map(|(id, c, ins, o, cf, att, v, g)| {
            DatasetRecord::new(id, Concept::ALL[c], ins, o, cf, att, Verdict::ALL[v], g)
        })
}

fn group(task: usize, cfs: usize) -> CombinedGroup {
    let id = format!("T/{task}");
    CombinedGroup {
        original: OriginalEntry { task_id: id.clone(), instruction: String::new(), code: "x = 1".into() },
        counterfactuals: (0..cfs)
            .map(|i| {
                DatasetRecord::new(
                    &id,
                    Concept::ALL[i % 5],
                    "",
                    "x = 1",
                    "y = 1",
                    1,
                    Verdict::AcceptedStructural,
                    "rule",
                )
            })
            .collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn renaming_preserves_alpha_hash_and_cfg(program in body()) {
        let (a, b) = (render(&program, &NAMES_A), render(&program, &NAMES_B));
        let ((da, ga), (db, gb)) = (digest_and_cfg(&a), digest_and_cfg(&b));
        prop_assert_eq!(&da.alpha_hash, &db.alpha_hash);
        prop_assert_ne!(&da.raw_hash, &db.raw_hash);
        prop_assert_ne!(&da.ast_hash, &db.ast_hash);
        prop_assert!(cfg_equivalent(&ga, &gb));
    }

    #[test]
    fn cfg_equivalence_is_an_equivalence(p in body(), q in body(), r in body()) {
        let gs: Vec<_> = [&p, &q, &r].iter().map(|x| digest_and_cfg(&render(x, &NAMES_A)).1).collect();
        for x in &gs {
            prop_assert!(cfg_equivalent(x, x));
        }
        for x in &gs {
            for y in &gs {
                prop_assert_eq!(cfg_equivalent(x, y), cfg_equivalent(y, x));
                for z in &gs {
                    if cfg_equivalent(x, y) && cfg_equivalent(y, z) {
                        prop_assert!(cfg_equivalent(x, z));
                    }
                }
            }
        }
    }

    #[test]
    fn pass_at_k_is_monotone_and_bounded(m in 1..=20u64, c in 0..=20u64, k in 1..=20u64) {
        let (c, k) = (c.min(m), k.min(m));
        let v = pass_at_k(m, c, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        if c < m {
            prop_assert!(pass_at_k(m, c + 1, k).unwrap() >= v);
        }
        if k < m {
            prop_assert!(pass_at_k(m, c, k + 1).unwrap() >= v);
        }
        prop_assert_eq!(pass_at_k(m, 0, k).unwrap(), 0.0);
        prop_assert_eq!(pass_at_k(m, m, k).unwrap(), 1.0);
    }

    #[test]
    fn ccs_stays_in_unit_interval(cells in prop::collection::vec(any::<(bool, bool)>(), 0..50)) {
        let table: Vec<PairVerdict> = cells
            .iter()
            .map(|&(a, b)| PairVerdict { task_id: "t".into(), concept: Concept::NameRandom, a_orig: a, a_cf: b })
            .collect();
        match ccs(&table) {
            Ccs::Score(s) => prop_assert!((0.0..=1.0).contains(&s)),
            Ccs::Undefined => prop_assert!(cells.iter().all(|&(a, b)| !a && !b)),
        }
    }

    #[test]
    fn diff_spans_lie_inside_the_counterfactual(o in any::<String>(), cf in any::<String>()) {
        let spans = annotate_diff(&o, &cf);
        let len = cf.chars().count();
        prop_assert!(spans.iter().all(|s| s.start < s.end && s.end <= len));
        prop_assert!(spans.windows(2).all(|w| w[0].end < w[1].start));
        prop_assert!(covered(&spans) <= len);
        prop_assert!(annotate_diff(&cf, &cf).is_empty());
    }

    #[test]
    fn records_round_trip_through_jsonl(records in prop::collection::vec(record_strategy(), 0..8)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        write_records(&records, &path).unwrap();
        prop_assert_eq!(read_records(&path).unwrap(), records);
    }

    #[test]
    fn batches_keep_groups_whole(sizes in prop::collection::vec(0..7usize, 0..30), extra in 0..5usize, seed in any::<u64>()) {
        let groups: Vec<CombinedGroup> = sizes.iter().enumerate().map(|(i, &n)| group(i, n)).collect();
        let batch_size = 7 + extra;
        let plan = plan_batches(&groups, batch_size, seed).unwrap();
        let mut seen: Vec<usize> = plan.batches.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..groups.len()).collect::<Vec<_>>());
        for b in &plan.batches {
            prop_assert!(!b.is_empty());
            prop_assert!(b.iter().map(|&g| groups[g].size()).sum::<usize>() <= batch_size);
        }
        prop_assert_eq!(plan_batches(&groups, batch_size, seed).unwrap(), plan);
    }

    #[test]
    fn split_is_by_task_and_deterministic(tasks in prop::collection::vec(0..12usize, 0..40), seed in any::<u64>()) {
        let records: Vec<DatasetRecord> = tasks.iter().flat_map(|&t| group(t, 1).counterfactuals).collect();
        let (train, test) = split_by_task(&records, seed);
        prop_assert_eq!(train.len() + test.len(), records.len());
        prop_assert!(train.iter().all(|r| test.iter().all(|s| s.task_id != r.task_id)));
        prop_assert_eq!(split_by_task(&records, seed), (train, test));
    }
}
