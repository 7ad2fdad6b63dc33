//! Benchmark input, counterfactual dataset records, combined groups and
//! batch layout.

pub mod diff;
pub mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{parse, ModelError, Span, SubjectProgram};
use crate::perturb::Concept;
use crate::validate::{TestHarness, Verdict};

pub use diff::annotate_diff;
pub use manifest::{ConceptStats, Manifest};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot access {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: invalid field `{field}`")]
    Schema { line: usize, field: String },
    #[error("counterfactual for unknown task `{0}`")]
    OrphanCounterfactual(String),
    #[error("group `{task_id}` has {size} members, more than the batch size {batch_size}")]
    GroupTooLarge { task_id: String, size: usize, batch_size: usize },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.to_path_buf(), source }
    }
}

/// One benchmark instance in HumanEval layout: `prompt` holds the
/// signature and docstring, `canonical_solution` the body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub prompt: String,
    pub canonical_solution: String,
    pub test: String,
    pub entry_point: String,
}

impl TaskRecord {
    /// The complete reference program.
    pub fn program_source(&self) -> String {
        format!("{}{}", self.prompt, self.canonical_solution)
    }

    pub fn harness(&self) -> TestHarness {
        TestHarness::new("", self.test.clone(), self.entry_point.clone())
    }

    /// Parses the reference program with the test harness names pinned.
    pub fn program(&self) -> Result<SubjectProgram, ModelError> {
        Ok(parse(&self.program_source(), &self.entry_point)?
            .with_origin(self.task_id.clone())
            .with_external_names(self.harness().external_names()))
    }
}

fn read_jsonl<T, F>(path: &Path, mut convert: F) -> Result<Vec<T>, DatasetError>
where
    F: FnMut(usize, Value) -> Result<T, DatasetError>,
{
    let file = std::fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|_| DatasetError::Schema { line: i + 1, field: "<json>".into() })?;
        out.push(convert(i + 1, value)?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<usize, DatasetError> {
    let file = std::fs::File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| DatasetError::io(path, e))?;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))?;
    Ok(items.len())
}

type FieldCheck = (&'static str, fn(&Value) -> bool);

/// Checks that `obj` has exactly `fields`, each deserializable by its
/// checker, reporting the first offending field.
fn check_fields(line: usize, value: &Value, fields: &[FieldCheck]) -> Result<(), DatasetError> {
    let err = |field: &str| DatasetError::Schema { line, field: field.to_string() };
    let obj = value.as_object().ok_or_else(|| err("<object>"))?;
    for (name, ok) in fields {
        match obj.get(*name) {
            Some(v) if ok(v) => {}
            _ => return Err(err(name)),
        }
    }
    if let Some(extra) = obj.keys().find(|k| !fields.iter().any(|(n, _)| n == k)) {
        return Err(err(extra));
    }
    Ok(())
}

fn is<T: serde::de::DeserializeOwned>(v: &Value) -> bool {
    serde_json::from_value::<T>(v.clone()).is_ok()
}

pub fn read_tasks(path: &Path) -> Result<Vec<TaskRecord>, DatasetError> {
    const FIELDS: &[FieldCheck] = &[
        ("task_id", Value::is_string),
        ("prompt", Value::is_string),
        ("canonical_solution", Value::is_string),
        ("test", Value::is_string),
        ("entry_point", Value::is_string),
    ];
    read_jsonl(path, |line, v| {
        let obj = v.as_object().ok_or(DatasetError::Schema { line, field: "<object>".into() })?;
        // Benchmarks often carry extra fields; only the known ones matter.
        for (name, ok) in FIELDS {
            if !obj.get(*name).is_some_and(ok) {
                return Err(DatasetError::Schema { line, field: name.to_string() });
            }
        }
        Ok(serde_json::from_value(v).expect("fields checked"))
    })
}

pub fn write_tasks(tasks: &[TaskRecord], path: &Path) -> Result<usize, DatasetError> {
    write_jsonl(path, tasks)
}

/// A validated original/counterfactual pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub task_id: String,
    pub concept: Concept,
    pub instruction: String,
    pub original_code: String,
    pub counterfactual_code: String,
    /// Character ranges of `counterfactual_code` that were modified.
    pub diff_spans: Vec<Span>,
    pub attempts: u32,
    pub verdict: Verdict,
    /// `rule` or `llm:<model>`.
    pub generator: String,
}

impl DatasetRecord {
    /// Builds a record, annotating the diff.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        task_id: impl Into<String>,
        concept: Concept,
        instruction: impl Into<String>,
        original_code: impl Into<String>,
        counterfactual_code: impl Into<String>,
        attempts: u32,
        verdict: Verdict,
        generator: impl Into<String>,
    ) -> Self {
        let original_code = original_code.into();
        let counterfactual_code = counterfactual_code.into();
        DatasetRecord {
            task_id: task_id.into(),
            concept,
            instruction: instruction.into(),
            diff_spans: annotate_diff(&original_code, &counterfactual_code),
            original_code,
            counterfactual_code,
            attempts,
            verdict,
            generator: generator.into(),
        }
    }

    fn spans_well_formed(&self) -> bool {
        let len = self.counterfactual_code.chars().count();
        self.diff_spans.iter().all(|s| s.start <= s.end && s.end <= len)
            && self.diff_spans.windows(2).all(|w| w[0].end <= w[1].start)
    }
}

pub fn write_records(records: &[DatasetRecord], path: &Path) -> Result<usize, DatasetError> {
    write_jsonl(path, records)
}

pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    const FIELDS: &[FieldCheck] = &[
        ("task_id", Value::is_string),
        ("concept", is::<Concept>),
        ("instruction", Value::is_string),
        ("original_code", Value::is_string),
        ("counterfactual_code", Value::is_string),
        ("diff_spans", is::<Vec<Span>>),
        ("attempts", is::<u32>),
        ("verdict", is::<Verdict>),
        ("generator", Value::is_string),
    ];
    read_jsonl(path, |line, v| {
        check_fields(line, &v, FIELDS)?;
        let r: DatasetRecord = serde_json::from_value(v).expect("fields checked");
        if !r.spans_well_formed() {
            return Err(DatasetError::Schema { line, field: "diff_spans".into() });
        }
        Ok(r)
    })
}

/// The original side of a combined group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OriginalEntry {
    pub task_id: String,
    pub instruction: String,
    pub code: String,
}

impl From<&TaskRecord> for OriginalEntry {
    fn from(t: &TaskRecord) -> Self {
        OriginalEntry { task_id: t.task_id.clone(), instruction: t.prompt.clone(), code: t.program_source() }
    }
}

/// An original together with every counterfactual generated for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinedGroup {
    pub original: OriginalEntry,
    pub counterfactuals: Vec<DatasetRecord>,
}

impl CombinedGroup {
    pub fn size(&self) -> usize {
        1 + self.counterfactuals.len()
    }
}

/// One group per original, in input order; counterfactuals ordered by
/// concept.
pub fn build_combined(
    originals: &[OriginalEntry],
    counterfactuals: &[DatasetRecord],
) -> Result<Vec<CombinedGroup>, DatasetError> {
    let known: BTreeSet<&str> = originals.iter().map(|o| o.task_id.as_str()).collect();
    let mut by_task: BTreeMap<&str, Vec<DatasetRecord>> = BTreeMap::new();
    for cf in counterfactuals {
        if !known.contains(cf.task_id.as_str()) {
            return Err(DatasetError::OrphanCounterfactual(cf.task_id.clone()));
        }
        by_task.entry(cf.task_id.as_str()).or_default().push(cf.clone());
    }
    Ok(originals
        .iter()
        .map(|o| {
            let mut cfs = by_task.remove(o.task_id.as_str()).unwrap_or_default();
            cfs.sort_by_key(|r| r.concept);
            CombinedGroup { original: o.clone(), counterfactuals: cfs }
        })
        .collect())
}

/// Batches of group indices; groups are never split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub batches: Vec<Vec<usize>>,
    pub batch_size: usize,
}

/// Seeded shuffle of the groups, then greedy packing of whole groups in
/// shuffled order; a batch closes when the next group does not fit.
pub fn plan_batches(groups: &[CombinedGroup], batch_size: usize, seed: u64) -> Result<BatchPlan, DatasetError> {
    if let Some(g) = groups.iter().find(|g| g.size() > batch_size) {
        return Err(DatasetError::GroupTooLarge { task_id: g.original.task_id.clone(), size: g.size(), batch_size });
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut batches: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut filled = 0;
    for g in order {
        let size = groups[g].size();
        if filled + size > batch_size {
            batches.push(std::mem::take(&mut current));
            filled = 0;
        }
        current.push(g);
        filled += size;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    Ok(BatchPlan { batches, batch_size })
}

/// Seeded 50/50 split by task: every record of a task lands on the same
/// side. The first half of the shuffled task ids goes to the first output.
pub fn split_by_task(records: &[DatasetRecord], seed: u64) -> (Vec<DatasetRecord>, Vec<DatasetRecord>) {
    let ids: BTreeSet<&str> = records.iter().map(|r| r.task_id.as_str()).collect();
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let first: BTreeSet<&str> = ids[..ids.len().div_ceil(2)].iter().copied().collect();
    records.iter().cloned().partition(|r| first.contains(r.task_id.as_str()))
}
