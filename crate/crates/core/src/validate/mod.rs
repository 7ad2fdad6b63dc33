//! Two-stage candidate validation: execution-free structural filtering,
//! then unit-test execution in a subprocess sandbox.

pub mod sandbox;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::model::ast::{Renderer, StmtKind};
use crate::model::digest::{canonical_namer, raw_hash};
use crate::model::lexer::{lexical_tokens, TokKind};
use crate::model::{build_cfg, cfg_equivalent, structural_digest, SubjectProgram};
use crate::perturb::Concept;
use sandbox::{run_script, RunStatus, SandboxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    AcceptedStructural,
    AcceptedByTests,
    /// The candidate is the input program (no perturbation applied).
    FailureTypeI,
    /// The candidate is not a valid program.
    FailureTypeII,
    RejectedByTests,
    ExecutionError,
}

impl Verdict {
    pub const ALL: [Verdict; 6] = [
        Verdict::AcceptedStructural,
        Verdict::AcceptedByTests,
        Verdict::FailureTypeI,
        Verdict::FailureTypeII,
        Verdict::RejectedByTests,
        Verdict::ExecutionError,
    ];

    pub fn is_accepted(self) -> bool {
        matches!(self, Verdict::AcceptedStructural | Verdict::AcceptedByTests)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::AcceptedStructural => "AcceptedStructural",
            Verdict::AcceptedByTests => "AcceptedByTests",
            Verdict::FailureTypeI => "FailureTypeI",
            Verdict::FailureTypeII => "FailureTypeII",
            Verdict::RejectedByTests => "RejectedByTests",
            Verdict::ExecutionError => "ExecutionError",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    FastFilter,
    Tests,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub verdict: Verdict,
    pub detail: String,
    pub tests_run: usize,
    pub duration_ms: u64,
    pub stage: Stage,
}

impl ValidationOutcome {
    fn filter(verdict: Verdict, detail: impl Into<String>, start: Instant) -> Self {
        ValidationOutcome {
            verdict,
            detail: detail.into(),
            tests_run: 0,
            duration_ms: start.elapsed().as_millis() as u64,
            stage: Stage::FastFilter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterResult {
    Decided(ValidationOutcome),
    Inconclusive,
}

#[derive(Debug, thiserror::Error)]
pub enum ValidateError {
    #[error("subject-language runtime unavailable: {0}")]
    SandboxUnavailable(String),
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// Test code and execution settings for one task. Clones share the
/// execution counter.
#[derive(Debug, Clone)]
pub struct TestHarness {
    pub prelude: String,
    pub test_code: String,
    pub entry_point: String,
    pub timeout: Duration,
    executions: Arc<AtomicUsize>,
}

impl TestHarness {
    pub fn new(prelude: impl Into<String>, test_code: impl Into<String>, entry_point: impl Into<String>) -> Self {
        TestHarness {
            prelude: prelude.into(),
            test_code: test_code.into(),
            entry_point: entry_point.into(),
            timeout: DEFAULT_TIMEOUT,
            executions: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        assert!(!timeout.is_zero(), "timeout must be positive");
        self.timeout = timeout;
        self
    }

    /// Number of sandbox runs performed through this harness.
    pub fn executions(&self) -> usize {
        self.executions.load(Ordering::SeqCst)
    }

    /// Identifiers mentioned by the prelude and test code; candidates must
    /// keep these spellings.
    pub fn external_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for text in [&self.prelude, &self.test_code] {
            if let Ok(toks) = lexical_tokens(text) {
                out.extend(toks.iter().filter(|t| t.kind == TokKind::Name).map(|t| t.text(text).to_string()));
            }
        }
        out.insert(self.entry_point.clone());
        out
    }

    /// Prelude, candidate and test code, plus a `check(<entry>)` call when
    /// the tests define a `check` function.
    pub fn compose(&self, candidate: &str) -> String {
        let mut out = String::new();
        for part in [&self.prelude, candidate, &self.test_code] {
            if part.is_empty() {
                continue;
            }
            out.push_str(part);
            if !part.ends_with('\n') {
                out.push('\n');
            }
            out.push('\n');
        }
        if self.test_code.contains("def check(") {
            out.push_str(&format!("check({})\n", self.entry_point));
        }
        out
    }

    /// Count of `assert` statements in the test code.
    pub fn assertion_count(&self) -> usize {
        lexical_tokens(&self.test_code)
            .map(|toks| toks.iter().filter(|t| t.kind == TokKind::Name && t.text(&self.test_code) == "assert").count())
            .unwrap_or(0)
    }
}

/// Canonical rendering of every top-level statement except the entry
/// function, under the program's canonical numbering.
fn render_context(program: &SubjectProgram) -> String {
    let namer = canonical_namer(program);
    let r = Renderer { rename: &namer };
    let mut out = String::new();
    for s in &program.module().body {
        let is_entry = matches!(&s.kind, StmtKind::FunctionDef { name, .. } if name.id == program.entry_point());
        if is_entry {
            out.push_str("<entry>\n");
        } else {
            r.stmt(s, 0, &mut out);
        }
    }
    out
}

/// Execution-free stage. `concept` disables structural acceptance for
/// concepts whose changes are never structure-preserving in general.
pub fn fast_filter_for(original: &SubjectProgram, candidate: &str, concept: Option<Concept>) -> FilterResult {
    let start = Instant::now();
    if raw_hash(candidate) == raw_hash(original.source()) {
        return FilterResult::Decided(ValidationOutcome::filter(
            Verdict::FailureTypeI,
            "candidate is identical to the original",
            start,
        ));
    }
    let parsed = match original.reparse(candidate) {
        Ok(p) => p,
        Err(e) => {
            return FilterResult::Decided(ValidationOutcome::filter(Verdict::FailureTypeII, e.to_string(), start));
        }
    };
    if concept == Some(Concept::IndependentSwap) {
        return FilterResult::Inconclusive;
    }
    let (a, b) = (structural_digest(original), structural_digest(&parsed));
    let detail = if a.ast_hash == b.ast_hash {
        Some("AST identical to the original")
    } else if a.alpha_hash == b.alpha_hash {
        Some("α-equivalent to the original")
    } else {
        match (build_cfg(original), build_cfg(&parsed)) {
            (Ok(ca), Ok(cb)) if cfg_equivalent(&ca, &cb) && render_context(original) == render_context(&parsed) => {
                Some("control-flow graph matches the original")
            }
            _ => None,
        }
    };
    match detail {
        Some(d) => FilterResult::Decided(ValidationOutcome::filter(Verdict::AcceptedStructural, d, start)),
        None => FilterResult::Inconclusive,
    }
}

pub fn fast_filter(original: &SubjectProgram, candidate: &str) -> FilterResult {
    fast_filter_for(original, candidate, None)
}

fn last_line(s: &str) -> &str {
    s.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("").trim()
}

/// Runs the composed program. Exit code 0 accepts; any other exit rejects;
/// timeouts and abnormal termination are execution errors.
pub fn run_tests(candidate: &str, harness: &TestHarness) -> Result<ValidationOutcome, ValidateError> {
    let start = Instant::now();
    harness.executions.fetch_add(1, Ordering::SeqCst);
    let result = match run_script(&harness.compose(candidate), harness.timeout) {
        Ok(r) => r,
        Err(SandboxError::Unavailable(py, e)) => return Err(ValidateError::SandboxUnavailable(format!("{py}: {e}"))),
        Err(SandboxError::Io(e)) => {
            return Ok(ValidationOutcome {
                verdict: Verdict::ExecutionError,
                detail: format!("sandbox failure: {e}"),
                tests_run: 0,
                duration_ms: start.elapsed().as_millis() as u64,
                stage: Stage::Tests,
            })
        }
    };
    let (verdict, detail, tests_run) = match result.status {
        RunStatus::Exited(0) => (Verdict::AcceptedByTests, "all tests passed".to_string(), harness.assertion_count()),
        RunStatus::Exited(code) => (
            Verdict::RejectedByTests,
            format!("exit code {code}: {}", last_line(&result.stderr)),
            harness.assertion_count(),
        ),
        RunStatus::TimedOut => {
            (Verdict::ExecutionError, format!("timeout after {:.1}s", harness.timeout.as_secs_f64()), 0)
        }
        RunStatus::Crashed => (Verdict::ExecutionError, "interpreter terminated abnormally".to_string(), 0),
    };
    Ok(ValidationOutcome {
        verdict,
        detail,
        tests_run,
        duration_ms: start.elapsed().as_millis() as u64,
        stage: Stage::Tests,
    })
}

/// Full funnel for a candidate generated for `concept`.
pub fn validate_candidate_for(
    original: &SubjectProgram,
    candidate: &str,
    harness: &TestHarness,
    concept: Option<Concept>,
) -> Result<ValidationOutcome, ValidateError> {
    let original = original.clone().with_external_names(harness.external_names());
    match fast_filter_for(&original, candidate, concept) {
        FilterResult::Decided(o) => Ok(o),
        FilterResult::Inconclusive => run_tests(candidate, harness),
    }
}

pub fn validate_candidate(
    original: &SubjectProgram,
    candidate: &str,
    harness: &TestHarness,
) -> Result<ValidationOutcome, ValidateError> {
    validate_candidate_for(original, candidate, harness, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse;

    const SRC: &str = "def inc(x):\n    if x > 0:\n        y = x + 1\n    else:\n        y = x - 1 + 2\n    return y\n";
    const TESTS: &str = "def check(candidate):\n    assert candidate(1) == 2\n    assert candidate(-3) == -2\n    assert candidate(0) == 1\n";

    fn harness() -> TestHarness {
        TestHarness::new("", TESTS, "inc")
    }

    fn original() -> SubjectProgram {
        parse(SRC, "inc").unwrap()
    }

    #[test]
    fn identical_candidate_is_failure_type_one() {
        let h = harness();
        let o = validate_candidate(&original(), SRC, &h).unwrap();
        assert_eq!(o.verdict, Verdict::FailureTypeI);
        assert_eq!(h.executions(), 0);
        let reformatted = SRC.replace('\n', "  \r\n");
        assert_eq!(validate_candidate(&original(), &reformatted, &h).unwrap().verdict, Verdict::FailureTypeI);
    }

    #[test]
    fn unparseable_candidate_is_failure_type_two() {
        let h = harness();
        assert_eq!(validate_candidate(&original(), "def f(:", &h).unwrap().verdict, Verdict::FailureTypeII);
        assert_eq!(
            validate_candidate(&original(), "def g(x):\n    return x\n", &h).unwrap().verdict,
            Verdict::FailureTypeII
        );
        assert_eq!(h.executions(), 0);
    }

    #[test]
    fn consistent_rename_is_accepted_without_execution() {
        let h = harness();
        let renamed = SRC.replace('y', "res").replace("(x", "(v").replace("x ", "v ");
        let o = validate_candidate(&original(), &renamed, &h).unwrap();
        assert_eq!(o.verdict, Verdict::AcceptedStructural, "{renamed}");
        assert_eq!((o.tests_run, h.executions()), (0, 0));
    }

    #[test]
    fn renaming_the_entry_point_is_not_structural() {
        let p = parse("def f(x):\n    return x\n", "f").unwrap();
        let h = TestHarness::new("", "assert f(1) == 1\n", "f");
        let o = validate_candidate(&p, "def f(y):\n    return y\n", &h).unwrap();
        assert_eq!(o.verdict, Verdict::AcceptedStructural);
    }

    #[test]
    fn reformatting_is_accepted_by_ast_hash() {
        let h = harness();
        let cand = SRC.replace("x + 1", "(x+1)");
        assert_eq!(validate_candidate(&original(), &cand, &h).unwrap().detail, "AST identical to the original");
    }

    #[test]
    fn flip_runs_tests() {
        let h = harness();
        let flipped =
            "def inc(x):\n    if not (x > 0):\n        y = x - 1 + 2\n    else:\n        y = x + 1\n    return y\n";
        let o = validate_candidate(&original(), flipped, &h).unwrap();
        assert_eq!(o.verdict, Verdict::AcceptedByTests, "{}", o.detail);
        assert_eq!(o.tests_run, 3);
        assert_eq!(h.executions(), 1);
    }

    #[test]
    fn wrong_behavior_is_rejected() {
        let o = run_tests("def inc(x):\n    return x - 1\n", &harness()).unwrap();
        assert_eq!(o.verdict, Verdict::RejectedByTests);
        assert!(o.detail.contains("AssertionError"), "{}", o.detail);
    }

    #[test]
    fn nontermination_is_an_execution_error() {
        let h = harness().with_timeout(Duration::from_secs(1));
        let start = Instant::now();
        let o = run_tests("def inc(x):\n    while True:\n        pass\n", &h).unwrap();
        assert_eq!(o.verdict, Verdict::ExecutionError);
        assert_eq!(o.tests_run, 0);
        assert!(start.elapsed() < Duration::from_secs(2));
    }

    #[test]
    fn swap_candidates_always_execute() {
        let p = parse("def f(a):\n    x = 1\n    y = 2\n    return x + y + a\n", "f").unwrap();
        let h = TestHarness::new("", "assert f(0) == 3\n", "f");
        let cand = "def f(a):\n    y = 2\n    x = 1\n    return x + y + a\n";
        let o = validate_candidate_for(&p, cand, &h, Some(Concept::IndependentSwap)).unwrap();
        assert_eq!(o.verdict, Verdict::AcceptedByTests);
        assert_eq!(h.executions(), 1);
    }

    #[test]
    fn composition_appends_check_call() {
        let h = TestHarness::new("import math", TESTS, "inc");
        let c = h.compose("def inc(x):\n    return x + 1");
        assert!(c.starts_with("import math\n\ndef inc"));
        assert!(c.ends_with("check(inc)\n"));
    }
}
