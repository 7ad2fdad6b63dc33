//! End-to-end generation runs over a benchmark: every task crossed with
//! every requested concept, through either the rule engine or an LLM
//! backend, producing dataset records and a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{read_tasks, write_records, DatasetError, DatasetRecord, Manifest, TaskRecord};
use crate::llm::{
    backend_from_config, generate_with_retries, Backend, BackendConfig, GenerationLog, GenerationOutcome, LlmError,
    PromptSpec, PromptVariant,
};
use crate::perturb::{apply, enumerate_sites, Concept};
use crate::validate::{validate_candidate_for, ValidateError, ValidationOutcome, Verdict, DEFAULT_TIMEOUT};

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Validate(#[from] ValidateError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Rule,
    Llm,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input_path: PathBuf,
    pub output_dir: PathBuf,
    pub concepts: Vec<Concept>,
    pub engine: Engine,
    pub backend: Option<BackendConfig>,
    pub seed: u64,
    pub workers: usize,
    pub timeout: Duration,
    pub variant: PromptVariant,
}

impl RunConfig {
    pub fn new(input_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            input_path: input_path.into(),
            output_dir: output_dir.into(),
            concepts: Concept::ALL.to_vec(),
            engine: Engine::Rule,
            backend: None,
            seed: 0,
            workers: 1,
            timeout: DEFAULT_TIMEOUT,
            variant: PromptVariant::Full,
        }
    }

    pub fn check(&self) -> Result<(), PipelineError> {
        if self.workers == 0 {
            return Err(PipelineError::Config("workers must be at least 1".into()));
        }
        if self.concepts.is_empty() {
            return Err(PipelineError::Config("no concepts selected".into()));
        }
        if self.timeout.is_zero() {
            return Err(PipelineError::Config("timeout must be positive".into()));
        }
        match (&self.engine, &self.backend) {
            (Engine::Llm, None) => Err(PipelineError::Config("llm engine needs a backend config".into())),
            (Engine::Llm, Some(b)) => Ok(b.check()?),
            (Engine::Rule, _) => Ok(()),
        }
    }

    pub fn generator_label(&self) -> String {
        match (&self.engine, &self.backend) {
            (Engine::Llm, Some(b)) => b.generator_label(),
            _ => "rule".to_string(),
        }
    }
}

/// Outcome for one task and concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub task_id: String,
    pub concept: Concept,
    pub eligible: bool,
    pub verdict: Verdict,
    pub attempts: u32,
    pub tokens: u64,
    pub detail: String,
    #[serde(skip)]
    pub record: Option<DatasetRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<GenerationLog>,
}

impl PairResult {
    fn ineligible(task: &TaskRecord, concept: Concept, detail: impl Into<String>) -> Self {
        PairResult {
            task_id: task.task_id.clone(),
            concept,
            eligible: false,
            verdict: Verdict::FailureTypeI,
            attempts: 0,
            tokens: 0,
            detail: detail.into(),
            record: None,
            log: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Accepted counterfactuals ordered by task id, then concept.
    pub records: Vec<DatasetRecord>,
    pub manifest: Manifest,
    pub pairs: Vec<PairResult>,
}

impl RunOutput {
    /// Writes `dataset.jsonl` and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| DatasetError::Io { path: dir.to_path_buf(), source: e })?;
        write_records(&self.records, &dir.join(DATASET_FILE))?;
        self.manifest.write(&dir.join(MANIFEST_FILE))?;
        Ok(())
    }
}

/// Site-selection seed for one pair, stable across runs and platforms.
pub fn pair_seed(seed: u64, task_id: &str, concept: Concept) -> u64 {
    let digest = Sha256::digest(format!("{seed}\u{0}{task_id}\u{0}{concept}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 8 bytes"))
}

fn rule_pair(task: &TaskRecord, concept: Concept, cfg: &RunConfig) -> Result<PairResult, PipelineError> {
    let program = match task.program() {
        Ok(p) => p,
        Err(e) => return Ok(PairResult::ineligible(task, concept, e.to_string())),
    };
    let sites = enumerate_sites(&program, concept);
    if sites.is_empty() {
        return Ok(PairResult::ineligible(task, concept, "no site"));
    }
    let pick = ChaCha8Rng::seed_from_u64(pair_seed(cfg.seed, &task.task_id, concept)).gen_range(0..sites.len());
    let mut result = PairResult {
        task_id: task.task_id.clone(),
        concept,
        eligible: true,
        verdict: Verdict::FailureTypeII,
        attempts: 1,
        tokens: 0,
        detail: String::new(),
        record: None,
        log: None,
    };
    let candidate = match apply(&program, &sites[pick], cfg.seed) {
        Ok(c) => c,
        Err(e) => {
            result.detail = e.to_string();
            return Ok(result);
        }
    };
    let harness = task.harness().with_timeout(cfg.timeout);
    let outcome = validate_candidate_for(&program, &candidate.source, &harness, Some(concept))?;
    result.verdict = outcome.verdict;
    result.detail = outcome.detail;
    if outcome.verdict.is_accepted() {
        result.record = Some(DatasetRecord::new(
            &task.task_id,
            concept,
            &task.prompt,
            program.source(),
            candidate.source,
            1,
            outcome.verdict,
            "rule",
        ));
    }
    Ok(result)
}

fn llm_pair(
    task: &TaskRecord,
    concept: Concept,
    cfg: &RunConfig,
    backend_cfg: &BackendConfig,
    backend: &dyn Backend,
) -> Result<PairResult, PipelineError> {
    let program = match task.program() {
        Ok(p) => p,
        Err(e) => return Ok(PairResult::ineligible(task, concept, e.to_string())),
    };
    let sites = enumerate_sites(&program, concept);
    if sites.is_empty() {
        return Ok(PairResult::ineligible(task, concept, "no site"));
    }
    let harness = task.harness().with_timeout(cfg.timeout);
    let spec = PromptSpec::new(concept, cfg.variant, task, &sites);
    let mut validator = |code: &str| validate_candidate_for(&program, code, &harness, Some(concept));
    let (outcome, log) = generate_with_retries(task, &sites, &spec, backend_cfg, backend, &mut validator)?;
    let attempts = log.attempts.len() as u32;
    let (verdict, detail, record) = match outcome {
        GenerationOutcome::Accepted(candidate, validation) => {
            let record = DatasetRecord::new(
                &task.task_id,
                concept,
                &task.prompt,
                program.source(),
                candidate.source,
                attempts,
                validation.verdict,
                backend_cfg.generator_label(),
            );
            (validation.verdict, validation.detail, Some(record))
        }
        GenerationOutcome::Failed(v) => (v, log.attempts.last().map(|a| a.detail.clone()).unwrap_or_default(), None),
    };
    Ok(PairResult {
        task_id: task.task_id.clone(),
        concept,
        eligible: true,
        verdict,
        attempts,
        tokens: log.total_tokens,
        detail,
        record,
        log: Some(log),
    })
}

/// Runs every task × concept pair. Results come back ordered by task id
/// and concept regardless of scheduling. `progress` sees each pair as it
/// finishes.
pub fn run(
    tasks: &[TaskRecord],
    cfg: &RunConfig,
    backend: Option<&dyn Backend>,
    progress: Option<&(dyn Fn(&PairResult) + Sync)>,
) -> Result<RunOutput, PipelineError> {
    cfg.check()?;
    let mut concepts = cfg.concepts.clone();
    concepts.sort();
    concepts.dedup();
    let mut order: Vec<&TaskRecord> = tasks.iter().collect();
    order.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    let pairs: Vec<(&TaskRecord, Concept)> =
        order.iter().flat_map(|t| concepts.iter().map(move |c| (*t, *c))).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let results: Result<Vec<PairResult>, PipelineError> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(task, concept)| {
                let r = match (cfg.engine, backend, &cfg.backend) {
                    (Engine::Llm, Some(b), Some(bc)) => llm_pair(task, *concept, cfg, bc, b),
                    (Engine::Llm, _, _) => Err(PipelineError::Config("llm engine needs a backend".into())),
                    (Engine::Rule, _, _) => rule_pair(task, *concept, cfg),
                }?;
                if let Some(report) = progress {
                    report(&r);
                }
                Ok(r)
            })
            .collect()
    });
    let pairs = results?;

    let dataset = cfg.input_path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    let mut manifest = Manifest::new(dataset, cfg.generator_label(), cfg.seed);
    manifest.tasks = tasks.len();
    for c in &concepts {
        manifest.concepts.entry(*c).or_default();
    }
    for p in &pairs {
        manifest.record(p.concept, p.eligible, p.verdict, p.attempts, p.tokens);
    }
    let records = pairs.iter().filter_map(|p| p.record.clone()).collect();
    Ok(RunOutput { records, manifest, pairs })
}

/// Re-runs the validator on stored records against their tasks, in input
/// order. A record whose task is missing gets `None`.
pub fn revalidate(
    records: &[DatasetRecord],
    tasks: &[TaskRecord],
    timeout: Duration,
    workers: usize,
) -> Result<Vec<Option<ValidationOutcome>>, PipelineError> {
    if workers == 0 {
        return Err(PipelineError::Config("workers must be at least 1".into()));
    }
    let by_id: BTreeMap<&str, &TaskRecord> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    pool.install(|| {
        records
            .par_iter()
            .map(|r| {
                let Some(task) = by_id.get(r.task_id.as_str()) else { return Ok(None) };
                let program = match task.program() {
                    Ok(p) => p,
                    Err(_) => return Ok(None),
                };
                let harness = task.harness().with_timeout(timeout);
                Ok(Some(validate_candidate_for(&program, &r.counterfactual_code, &harness, Some(r.concept))?))
            })
            .collect()
    })
}

/// Rule-engine run: reads the input, generates, writes the outputs.
pub fn cmd_perturb(
    cfg: &RunConfig,
    progress: Option<&(dyn Fn(&PairResult) + Sync)>,
) -> Result<RunOutput, PipelineError> {
    let cfg = RunConfig { engine: Engine::Rule, ..cfg.clone() };
    let tasks = read_tasks(&cfg.input_path)?;
    let out = run(&tasks, &cfg, None, progress)?;
    out.write(&cfg.output_dir)?;
    Ok(out)
}

/// LLM run through the configured backend.
pub fn cmd_gen(cfg: &RunConfig, progress: Option<&(dyn Fn(&PairResult) + Sync)>) -> Result<RunOutput, PipelineError> {
    let cfg = RunConfig { engine: Engine::Llm, ..cfg.clone() };
    cfg.check()?;
    let backend = backend_from_config(cfg.backend.as_ref().expect("checked"))?;
    let tasks = read_tasks(&cfg.input_path)?;
    let out = run(&tasks, &cfg, Some(backend.as_ref()), progress)?;
    out.write(&cfg.output_dir)?;
    Ok(out)
}
