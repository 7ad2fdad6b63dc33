//! Per-concept run accounting: eligibility, successes, failures by type,
//! attempt and token costs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::perturb::Concept;
use crate::validate::Verdict;

use super::DatasetError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptStats {
    /// Task pairs where the concept had at least one site (b).
    pub eligible: u64,
    /// Accepted counterfactuals (a).
    pub success: u64,
    /// Terminal failure verdicts, including non-eligible tasks as
    /// `FailureTypeI`.
    pub failures: BTreeMap<Verdict, u64>,
    pub attempts_total: u64,
    pub tokens_total: u64,
    pub avg_attempts: f64,
    pub avg_tokens: f64,
}

impl ConceptStats {
    pub fn record(&mut self, eligible: bool, verdict: Verdict, attempts: u32, tokens: u64) {
        if eligible {
            self.eligible += 1;
            self.attempts_total += u64::from(attempts);
            self.tokens_total += tokens;
        }
        if verdict.is_accepted() {
            self.success += 1;
        } else {
            *self.failures.entry(verdict).or_default() += 1;
        }
        self.refresh_averages();
    }

    fn refresh_averages(&mut self) {
        let (avg_attempts, avg_tokens) = if self.eligible == 0 {
            (0.0, 0.0)
        } else {
            let b = self.eligible as f64;
            (self.attempts_total as f64 / b, self.tokens_total as f64 / b)
        };
        self.avg_attempts = avg_attempts;
        self.avg_tokens = avg_tokens;
    }

    /// Number of task pairs accounted for.
    pub fn processed(&self) -> u64 {
        self.success + self.failures.values().sum::<u64>()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: String,
    /// `rule` or `llm:<model>`.
    pub generator: String,
    pub seed: u64,
    pub tasks: usize,
    pub concepts: BTreeMap<Concept, ConceptStats>,
}

impl Manifest {
    pub fn new(dataset: impl Into<String>, generator: impl Into<String>, seed: u64) -> Self {
        Manifest { dataset: dataset.into(), generator: generator.into(), seed, ..Default::default() }
    }

    pub fn record(&mut self, concept: Concept, eligible: bool, verdict: Verdict, attempts: u32, tokens: u64) {
        self.concepts.entry(concept).or_default().record(eligible, verdict, attempts, tokens);
    }

    pub fn total_success(&self) -> u64 {
        self.concepts.values().map(|c| c.success).sum()
    }

    pub fn total_eligible(&self) -> u64 {
        self.concepts.values().map(|c| c.eligible).sum()
    }

    pub fn processed(&self) -> u64 {
        self.concepts.values().map(ConceptStats::processed).sum()
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| DatasetError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Manifest, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Schema { line: e.line(), field: e.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accounting_conserves_pairs() {
        let mut m = Manifest::new("toy", "rule", 0);
        m.record(Concept::IfElseFlip, true, Verdict::AcceptedByTests, 1, 0);
        m.record(Concept::IfElseFlip, false, Verdict::FailureTypeI, 0, 0);
        m.record(Concept::NameRandom, true, Verdict::RejectedByTests, 3, 30);
        assert_eq!(m.processed(), 3);
        assert_eq!(m.total_success(), 1);
        assert_eq!(m.total_eligible(), 2);
        let nr = &m.concepts[&Concept::NameRandom];
        assert_eq!((nr.avg_attempts, nr.avg_tokens), (3.0, 30.0));
        assert_eq!(m.concepts[&Concept::IfElseFlip].failures[&Verdict::FailureTypeI], 1);
    }

    #[test]
    fn round_trips_through_json() {
        let mut m = Manifest::new("toy", "llm:mock", 7);
        m.tasks = 2;
        m.record(Concept::NameShuffle, true, Verdict::AcceptedStructural, 2, 500);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        m.write(&p).unwrap();
        assert_eq!(Manifest::read(&p).unwrap(), m);
    }
}
