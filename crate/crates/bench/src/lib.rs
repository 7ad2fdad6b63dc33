//! Shared inputs for the benchmarks.

use std::path::PathBuf;

use procure::dataset::read_tasks;
use procure::TaskRecord;

/// The bundled task corpus.
pub fn corpus() -> Vec<TaskRecord> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/corpus.jsonl");
    read_tasks(&path).expect("bundled corpus is readable")
}
