//! Concept-guided one-shot prompt construction.
//!
//! The template ships as a versioned JSON asset. A prompt has up to five
//! sections, always in this order: instruction, static analysis
//! information, reasoning steps, one-shot example, target program.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dataset::TaskRecord;
use crate::perturb::{Concept, PerturbationSite};

const TEMPLATE_JSON: &str = include_str!("../../assets/prompt_v1.json");

#[derive(Debug, Clone, Deserialize)]
pub struct ConceptAssets {
    pub title: String,
    pub definition: String,
    pub steps: Vec<String>,
    pub example_input: String,
    pub example_output: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SectionTitles {
    pub static_info: String,
    pub steps: String,
    pub example: String,
    pub target: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PromptTemplate {
    pub version: String,
    pub instruction: String,
    pub sections: SectionTitles,
    pub concepts: BTreeMap<Concept, ConceptAssets>,
}

impl PromptTemplate {
    /// The bundled template.
    pub fn bundled() -> &'static PromptTemplate {
        static TEMPLATE: OnceLock<PromptTemplate> = OnceLock::new();
        TEMPLATE.get_or_init(|| serde_json::from_str(TEMPLATE_JSON).expect("bundled prompt template is valid"))
    }

    pub fn concept(&self, concept: Concept) -> &ConceptAssets {
        self.concepts.get(&concept).expect("template covers every concept")
    }
}

/// Prompt ablation variants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptVariant {
    #[default]
    Full,
    /// Instruction and target program only.
    Vanilla,
    NoOneShot,
    NoCoT,
    NoStaticInfo,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 5] = [
        PromptVariant::Full,
        PromptVariant::Vanilla,
        PromptVariant::NoOneShot,
        PromptVariant::NoCoT,
        PromptVariant::NoStaticInfo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::Full => "full",
            PromptVariant::Vanilla => "vanilla",
            PromptVariant::NoOneShot => "no-one-shot",
            PromptVariant::NoCoT => "no-cot",
            PromptVariant::NoStaticInfo => "no-static-info",
        }
    }

    pub fn has_static_info(self) -> bool {
        matches!(self, PromptVariant::Full | PromptVariant::NoOneShot | PromptVariant::NoCoT)
    }

    pub fn has_steps(self) -> bool {
        matches!(self, PromptVariant::Full | PromptVariant::NoOneShot | PromptVariant::NoStaticInfo)
    }

    pub fn has_one_shot(self) -> bool {
        matches!(self, PromptVariant::Full | PromptVariant::NoCoT | PromptVariant::NoStaticInfo)
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown prompt variant `{0}`")]
pub struct UnknownVariant(pub String);

impl FromStr for PromptVariant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_lowercase();
        PromptVariant::ALL
            .into_iter()
            .find(|v| v.as_str().replace('-', "") == key)
            .ok_or_else(|| UnknownVariant(s.to_string()))
    }
}

/// Everything a prompt is rendered from. Sections dropped by the variant are
/// left empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub concept: Concept,
    pub variant: PromptVariant,
    pub static_info: Vec<String>,
    pub one_shot: Option<(String, String)>,
    pub cot_steps: Vec<String>,
    pub target_code: String,
}

impl PromptSpec {
    /// Fills the components from the bundled template, the site list and
    /// the task's reference program.
    pub fn new(concept: Concept, variant: PromptVariant, task: &TaskRecord, sites: &[PerturbationSite]) -> Self {
        let assets = PromptTemplate::bundled().concept(concept);
        PromptSpec {
            concept,
            variant,
            static_info: if variant.has_static_info() {
                sites.iter().filter(|s| s.concept == concept).map(|s| s.notes.clone()).collect()
            } else {
                Vec::new()
            },
            one_shot: variant.has_one_shot().then(|| (assets.example_input.clone(), assets.example_output.clone())),
            cot_steps: if variant.has_steps() { assets.steps.clone() } else { Vec::new() },
            target_code: task.program_source(),
        }
    }
}

fn code_block(code: &str) -> String {
    format!("```python\n{}\n```", code.trim_end_matches('\n'))
}

fn render(spec: &PromptSpec, entry_point: &str) -> String {
    let template = PromptTemplate::bundled();
    let assets = template.concept(spec.concept);
    let titles = &template.sections;
    let mut sections = vec![template
        .instruction
        .replace("{title}", &assets.title)
        .replace("{definition}", &assets.definition)
        .replace("{entry_point}", entry_point)];
    if spec.variant.has_static_info() && !spec.static_info.is_empty() {
        let items: Vec<String> = spec.static_info.iter().map(|s| format!("- {s}")).collect();
        sections.push(format!("## {}\n{}", titles.static_info, items.join("\n")));
    }
    if spec.variant.has_steps() && !spec.cot_steps.is_empty() {
        let items: Vec<String> =
            spec.cot_steps.iter().enumerate().map(|(i, s)| format!("Step {}: {s}", i + 1)).collect();
        sections.push(format!("## {}\n{}", titles.steps, items.join("\n")));
    }
    if let (true, Some((input, output))) = (spec.variant.has_one_shot(), &spec.one_shot) {
        sections.push(format!("## {}\nInput:\n{}\nOutput:\n{}", titles.example, code_block(input), code_block(output)));
    }
    sections.push(format!("## {}\n{}", titles.target, code_block(&spec.target_code)));
    let mut out = sections.join("\n\n");
    out.push('\n');
    out
}

/// Renders the prompt for `task`. Static information comes from the sites
/// of the spec's concept; the target is the task's reference program.
pub fn build_prompt(task: &TaskRecord, sites: &[PerturbationSite], spec: &PromptSpec) -> String {
    let mut spec = spec.clone();
    spec.static_info = sites.iter().filter(|s| s.concept == spec.concept).map(|s| s.notes.clone()).collect();
    spec.target_code = task.program_source();
    render(&spec, &task.entry_point)
}
