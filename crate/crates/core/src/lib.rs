//! Concept-oriented counterfactual program generation.
//!
//! Programs are perturbed along one programming concept at a time (control
//! flow, data flow, identifier naming), either by deterministic rules or by
//! an LLM guided with static-analysis prompts. Every candidate goes through
//! a validation funnel (hash and syntax filters, structural equivalence,
//! then test execution) before it enters a dataset.

pub mod dataset;
pub mod llm;
pub mod metrics;
pub mod model;
pub mod perturb;
pub mod pipeline;
pub mod validate;

pub use dataset::{DatasetRecord, Manifest, TaskRecord};
pub use llm::{BackendConfig, GenerationLog, PromptSpec, PromptVariant};
pub use model::{parse, SubjectProgram};
pub use perturb::{apply, enumerate_sites, Concept, CounterfactualCandidate, PerturbationSite};
pub use pipeline::{Engine, RunConfig};
pub use validate::{validate_candidate, TestHarness, ValidationOutcome, Verdict};
