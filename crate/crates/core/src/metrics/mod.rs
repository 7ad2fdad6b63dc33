//! Evaluation metrics: attribution, the unbiased pass@k estimator, the
//! concept consistency score, and success/cost aggregation over manifests.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetError, Manifest, TaskRecord};
use crate::perturb::Concept;
use crate::validate::{run_tests, TestHarness, ValidateError, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// 1 when the program `prefix + completion` passes every test of the
/// harness within its timeout, 0 otherwise. In HumanEval layout the
/// instruction is part of the prefix (the docstring).
pub fn attribute(prefix: &str, completion: &str, harness: &TestHarness) -> Result<u8, ValidateError> {
    let outcome = run_tests(&format!("{prefix}{completion}"), harness)?;
    Ok(u8::from(outcome.verdict == Verdict::AcceptedByTests))
}

/// Unbiased pass@k for `m` samples of which `c` are correct:
/// 1 - C(m-c, k) / C(m, k), evaluated as a product to stay stable.
pub fn pass_at_k(m: u64, c: u64, k: u64) -> Result<f64, MetricsError> {
    if c > m || k == 0 || k > m {
        return Err(MetricsError::Domain(format!("pass@k needs 0 <= c <= m and 1 <= k <= m (m={m}, c={c}, k={k})")));
    }
    if m - c < k {
        return Ok(1.0);
    }
    let mut miss = 1.0f64;
    for i in (m - c + 1)..=m {
        miss *= 1.0 - k as f64 / i as f64;
    }
    Ok(1.0 - miss)
}

/// Mean pass@k over tasks given as (m, c); tasks with fewer than `k`
/// samples are skipped. `None` when no task qualifies.
pub fn mean_pass_at_k(tasks: &[(u64, u64)], k: u64) -> Result<Option<f64>, MetricsError> {
    let mut vals = Vec::new();
    for &(m, c) in tasks.iter().filter(|(m, _)| *m >= k) {
        vals.push(pass_at_k(m, c, k)?);
    }
    Ok((!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub task_id: String,
    pub concept: Concept,
    pub a_orig: bool,
    pub a_cf: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ccs {
    Score(f64),
    Undefined,
}

impl Ccs {
    pub fn value(self) -> Option<f64> {
        match self {
            Ccs::Score(v) => Some(v),
            Ccs::Undefined => None,
        }
    }
}

/// Concept consistency: among pairs where at least one side is attributed,
/// the fraction whose two sides agree.
pub fn ccs(pairs: &[PairVerdict]) -> Ccs {
    let relevant: Vec<&PairVerdict> = pairs.iter().filter(|p| p.a_orig || p.a_cf).collect();
    if relevant.is_empty() {
        return Ccs::Undefined;
    }
    let consistent = relevant.iter().filter(|p| p.a_orig == p.a_cf).count();
    Ccs::Score(consistent as f64 / relevant.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    Original,
    Counterfactual(Concept),
}

impl Variant {
    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "original" => Some(Variant::Original),
            _ => s.strip_prefix("cf:").and_then(|c| c.parse().ok()).map(Variant::Counterfactual),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionRow {
    pub task_id: String,
    /// `original` or `cf:<Concept>`.
    pub variant: String,
    pub sample_index: u32,
    pub attributed: u8,
}

/// Reads and checks an attribution table (binary values, unique keys,
/// known variants).
pub fn read_attribution(path: &Path) -> Result<Vec<AttributionRow>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io { path: path.to_path_buf(), source: e })?;
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let schema = |field: &str| DatasetError::Schema { line: i + 1, field: field.to_string() };
        let row: AttributionRow = serde_json::from_str(line).map_err(|e| {
            let msg = e.to_string();
            let field = msg.split('`').nth(1).unwrap_or("<json>").to_string();
            schema(&field)
        })?;
        if row.attributed > 1 {
            return Err(schema("attributed"));
        }
        if Variant::parse(&row.variant).is_none() {
            return Err(schema("variant"));
        }
        if !seen.insert((row.task_id.clone(), row.variant.clone(), row.sample_index)) {
            return Err(schema("sample_index"));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// One sampled completion to attribute. The prefix is the code the model
/// continued, original or counterfactual.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRow {
    pub task_id: String,
    pub variant: String,
    pub sample_index: u32,
    pub prefix: String,
    pub completion: String,
}

pub fn read_completions(path: &Path) -> Result<Vec<CompletionRow>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io { path: path.to_path_buf(), source: e })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: CompletionRow = serde_json::from_str(line).map_err(|e| {
            let msg = e.to_string();
            DatasetError::Schema { line: i + 1, field: msg.split('`').nth(1).unwrap_or("<json>").to_string() }
        })?;
        if Variant::parse(&row.variant).is_none() {
            return Err(DatasetError::Schema { line: i + 1, field: "variant".into() });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Attributes every completion against its task's tests, in parallel.
/// Rows whose task is unknown are an error.
pub fn attribute_completions(
    rows: &[CompletionRow],
    tasks: &[TaskRecord],
    timeout: Duration,
) -> Result<Vec<AttributionRow>, AttributeError> {
    let harnesses: BTreeMap<&str, TestHarness> =
        tasks.iter().map(|t| (t.task_id.as_str(), t.harness().with_timeout(timeout))).collect();
    rows.par_iter()
        .map(|r| {
            let harness =
                harnesses.get(r.task_id.as_str()).ok_or_else(|| AttributeError::UnknownTask(r.task_id.clone()))?;
            Ok(AttributionRow {
                task_id: r.task_id.clone(),
                variant: r.variant.clone(),
                sample_index: r.sample_index,
                attributed: attribute(&r.prefix, &r.completion, harness)?,
            })
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum AttributeError {
    #[error("completion for unknown task `{0}`")]
    UnknownTask(String),
    #[error(transparent)]
    Validate(#[from] ValidateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pass_at_1: Option<f64>,
    pub pass_at_5: Option<f64>,
    pub ccs_overall: Option<f64>,
    pub ccs_per_concept: BTreeMap<Concept, Option<f64>>,
}

/// Pairs each counterfactual sample with the original sample of the same
/// task and sample index.
pub fn pair_verdicts(rows: &[AttributionRow]) -> Vec<PairVerdict> {
    let originals: BTreeMap<(&str, u32), bool> = rows
        .iter()
        .filter(|r| Variant::parse(&r.variant) == Some(Variant::Original))
        .map(|r| ((r.task_id.as_str(), r.sample_index), r.attributed == 1))
        .collect();
    let mut pairs = Vec::new();
    for r in rows {
        if let Some(Variant::Counterfactual(concept)) = Variant::parse(&r.variant) {
            if let Some(&a_orig) = originals.get(&(r.task_id.as_str(), r.sample_index)) {
                pairs.push(PairVerdict { task_id: r.task_id.clone(), concept, a_orig, a_cf: r.attributed == 1 });
            }
        }
    }
    pairs
}

/// pass@1 and pass@5 over original samples, CCS overall and per concept.
pub fn evaluate(rows: &[AttributionRow]) -> Result<EvalReport, MetricsError> {
    let mut per_task: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for r in rows.iter().filter(|r| Variant::parse(&r.variant) == Some(Variant::Original)) {
        let e = per_task.entry(r.task_id.as_str()).or_default();
        e.0 += 1;
        e.1 += u64::from(r.attributed);
    }
    let tasks: Vec<(u64, u64)> = per_task.into_values().collect();
    let pairs = pair_verdicts(rows);
    let mut by_concept: BTreeMap<Concept, Vec<PairVerdict>> = BTreeMap::new();
    for p in &pairs {
        by_concept.entry(p.concept).or_default().push(p.clone());
    }
    Ok(EvalReport {
        pass_at_1: mean_pass_at_k(&tasks, 1)?,
        pass_at_5: mean_pass_at_k(&tasks, 5)?,
        ccs_overall: ccs(&pairs).value(),
        ccs_per_concept: by_concept.into_iter().map(|(c, ps)| (c, ccs(&ps).value())).collect(),
    })
}

/// One benchmark's success cells (a successes out of b eligible) per
/// concept.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessCells {
    pub dataset: String,
    pub cells: Vec<(Concept, u64, u64)>,
}

impl From<&Manifest> for SuccessCells {
    fn from(m: &Manifest) -> Self {
        SuccessCells {
            dataset: m.dataset.clone(),
            cells: m.concepts.iter().map(|(c, s)| (*c, s.success, s.eligible)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSuccess {
    pub dataset: String,
    pub success: u64,
    pub eligible: u64,
    /// Micro average Σa/Σb; `None` when nothing was eligible.
    pub rate: Option<f64>,
    pub per_concept: BTreeMap<Concept, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessStats {
    pub datasets: Vec<DatasetSuccess>,
    /// Unweighted mean of the defined dataset rates.
    pub macro_rate: Option<f64>,
    pub total_success: u64,
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn success_stats(datasets: &[SuccessCells]) -> Result<SuccessStats, MetricsError> {
    let mut out = Vec::new();
    for d in datasets {
        if let Some((c, a, b)) = d.cells.iter().find(|(_, a, b)| a > b) {
            return Err(MetricsError::Domain(format!("{}: {c} has {a} successes out of {b}", d.dataset)));
        }
        let success: u64 = d.cells.iter().map(|c| c.1).sum();
        let eligible: u64 = d.cells.iter().map(|c| c.2).sum();
        out.push(DatasetSuccess {
            dataset: d.dataset.clone(),
            success,
            eligible,
            rate: ratio(success, eligible),
            per_concept: d.cells.iter().map(|(c, a, b)| (*c, ratio(*a, *b))).collect(),
        });
    }
    let rates: Vec<f64> = out.iter().filter_map(|d| d.rate).collect();
    Ok(SuccessStats { macro_rate: mean(&rates), total_success: out.iter().map(|d| d.success).sum(), datasets: out })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetCost {
    pub dataset: String,
    /// Unweighted mean over concepts with eligible tasks.
    pub avg_attempts: Option<f64>,
    pub avg_tokens: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostStats {
    pub datasets: Vec<DatasetCost>,
    pub macro_attempts: Option<f64>,
    pub macro_tokens: Option<f64>,
}

pub fn cost_stats(manifests: &[Manifest]) -> CostStats {
    let datasets: Vec<DatasetCost> = manifests
        .iter()
        .map(|m| {
            let live: Vec<_> = m.concepts.values().filter(|c| c.eligible > 0).collect();
            let attempts: Vec<f64> = live.iter().map(|c| c.avg_attempts).collect();
            let tokens: Vec<f64> = live.iter().map(|c| c.avg_tokens).collect();
            DatasetCost { dataset: m.dataset.clone(), avg_attempts: mean(&attempts), avg_tokens: mean(&tokens) }
        })
        .collect();
    let attempts: Vec<f64> = datasets.iter().filter_map(|d| d.avg_attempts).collect();
    let tokens: Vec<f64> = datasets.iter().filter_map(|d| d.avg_tokens).collect();
    CostStats { macro_attempts: mean(&attempts), macro_tokens: mean(&tokens), datasets }
}
