//! LLM-backed counterfactual generation with a bounded
//! generate-validate-retry loop.

pub mod backend;
pub mod prompt;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dataset::TaskRecord;
use crate::model::ast::StmtKind;
use crate::model::parser::parse_module;
use crate::perturb::{CounterfactualCandidate, PerturbationSite};
use crate::validate::{ValidateError, ValidationOutcome, Verdict};

pub use backend::{
    backend_from_config, prompt_hash, Backend, BackendConfig, BackendKind, Completion, HttpBackend, MockBackend,
    MockReply, AUTH_ENV,
};
pub use prompt::{build_prompt, PromptSpec, PromptTemplate, PromptVariant};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no code found in model response")]
    MalformedResponse { raw: String, tokens: Option<u64> },
    #[error("backend config: {0}")]
    Config(String),
    #[error("fixture {path}: {message}")]
    Fixture { path: PathBuf, message: String },
    #[error(transparent)]
    Validation(#[from] ValidateError),
}

/// The first fenced code block of `response`; without one, the whole
/// response when it parses as a module defining a function.
pub fn extract_code(response: &str) -> Option<String> {
    if let Some(open) = response.find("```") {
        let after = &response[open + 3..];
        let body_start = after.find('\n').map(|i| i + 1)?;
        let body = &after[body_start..];
        let end = body.find("```").unwrap_or(body.len());
        let code = body[..end].trim_end_matches([' ', '\t']);
        return Some(if code.ends_with('\n') || code.is_empty() { code.to_string() } else { format!("{code}\n") });
    }
    let module = parse_module(response).ok()?;
    module.body.iter().any(|s| matches!(s.kind, StmtKind::FunctionDef { .. })).then(|| response.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub code: String,
    pub raw: String,
    pub tokens: Option<u64>,
}

/// One backend round trip and code extraction.
pub fn generate_candidate(prompt: &str, cfg: &BackendConfig, backend: &dyn Backend) -> Result<Generated, LlmError> {
    let completion = backend.complete(prompt, cfg)?;
    match extract_code(&completion.text) {
        Some(code) => Ok(Generated { code, raw: completion.text, tokens: completion.tokens }),
        None => Err(LlmError::MalformedResponse { raw: completion.text, tokens: completion.tokens }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub index: u32,
    pub prompt_bytes: usize,
    pub tokens: Option<u64>,
    /// `None` when the request itself failed.
    pub verdict: Option<Verdict>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub attempts: Vec<AttemptRecord>,
    pub total_tokens: u64,
    pub succeeded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum GenerationOutcome {
    Accepted(CounterfactualCandidate, ValidationOutcome),
    Failed(Verdict),
}

/// Prompts, generates and validates up to `cfg.max_retries` times, stopping
/// at the first accepted candidate. A response without code counts as
/// `FailureTypeII`. Transport errors are retried and only surface when every
/// attempt failed that way.
pub fn generate_with_retries(
    task: &TaskRecord,
    sites: &[PerturbationSite],
    spec: &PromptSpec,
    cfg: &BackendConfig,
    backend: &dyn Backend,
    validator: &mut dyn FnMut(&str) -> Result<ValidationOutcome, ValidateError>,
) -> Result<(GenerationOutcome, GenerationLog), LlmError> {
    cfg.check()?;
    let mut log = GenerationLog::default();
    let mut last_verdict = None;
    let mut last_transport = None;
    for index in 1..=cfg.max_retries {
        let prompt = build_prompt(task, sites, spec);
        let mut record =
            AttemptRecord { index, prompt_bytes: prompt.len(), tokens: None, verdict: None, detail: String::new() };
        match generate_candidate(&prompt, cfg, backend) {
            Err(LlmError::Transport(e)) => {
                record.detail = e.clone();
                last_transport = Some(e);
            }
            Err(LlmError::MalformedResponse { tokens, .. }) => {
                record.tokens = tokens;
                record.verdict = Some(Verdict::FailureTypeII);
                record.detail = "no code in response".into();
            }
            Err(e) => return Err(e),
            Ok(generated) => {
                record.tokens = generated.tokens;
                let outcome = validator(&generated.code)?;
                record.verdict = Some(outcome.verdict);
                record.detail = outcome.detail.clone();
                if outcome.verdict.is_accepted() {
                    log.total_tokens += generated.tokens.unwrap_or(0);
                    log.attempts.push(record);
                    log.succeeded = true;
                    let candidate = CounterfactualCandidate {
                        concept: spec.concept,
                        source: generated.code,
                        site: None,
                        impact_region: Default::default(),
                        rename_map: None,
                        attempt: index,
                    };
                    return Ok((GenerationOutcome::Accepted(candidate, outcome), log));
                }
            }
        }
        log.total_tokens += record.tokens.unwrap_or(0);
        last_verdict = record.verdict.or(last_verdict);
        log.attempts.push(record);
    }
    match (last_verdict, last_transport) {
        (Some(v), _) => Ok((GenerationOutcome::Failed(v), log)),
        (None, Some(e)) => Err(LlmError::Transport(e)),
        (None, None) => unreachable!("max_retries >= 1"),
    }
}
