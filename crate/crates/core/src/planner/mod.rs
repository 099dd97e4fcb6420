//! Instruction → program compilation.
//!
//! A fixed table of instruction templates stands in for an LLM planner
//! (an LLM endpoint can be used instead through [`llm_plan_request`]).
//! Each match is expanded into every valid statement ordering of its
//! dataflow graph, so callers can pick an alternate plan.

mod dataflow;
mod llm;
mod templates;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Diagnostic, Program};
use crate::geometry::Roi;

pub use dataflow::{topological_orders, validate_dataflow, Dag, Dataflow};
pub use llm::{default_exemplars, llm_plan_request, llm_plan_request_with_timeout, llm_request_body, Exemplar, LLM_MAX_LENGTH, LLM_TEMPERATURE};
pub use templates::{match_template, match_template_ungrounded, DEFAULT_ENLARGE, DEFAULT_MOVE_FRACTION, DEFAULT_SHRINK, TEMPLATE_IDS};

/// Default cap on enumerated orderings.
pub const DEFAULT_ORDERING_LIMIT: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no instruction template matches `{0}`")]
    NoTemplateMatch(String),
    #[error("selector `{selector}` matches {matches} segments; add a position such as left or right")]
    AmbiguousSelector { selector: String, matches: usize },
    #[error("planner transport failed: {0}")]
    TransportError(String),
    #[error("planner returned an invalid program")]
    InvalidProgramReturned { raw: String, diagnostics: Vec<Diagnostic> },
    #[error("at least one exemplar is required")]
    NoExemplars,
    #[error("invalid plan: {0:?}")]
    InvalidPlan(Vec<Diagnostic>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSegment {
    pub label: String,
    pub centroid: (f64, f64),
    pub area: usize,
}

/// What the planner knows about the image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub segments: Vec<SceneSegment>,
    pub image_size: (u32, u32),
}

impl SceneSummary {
    pub fn from_rois(rois: &[Roi], image_size: (u32, u32)) -> Self {
        let segments = rois
            .iter()
            .map(|r| SceneSegment { label: r.label().to_string(), centroid: r.centroid(), area: r.area() })
            .collect();
        Self { segments, image_size }
    }

    pub fn count_label(&self, label: &str) -> usize {
        self.segments.iter().filter(|s| s.label.eq_ignore_ascii_case(label)).count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Template(String),
    Llm,
    /// Alternate ordering of candidate `k` in the same list.
    ReorderingOf(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanCandidate {
    pub program: Program,
    pub dataflow: Dag,
    pub provenance: Provenance,
}

impl PlanCandidate {
    /// Validate and wrap a program.
    pub fn new(program: Program, provenance: Provenance) -> Result<Self, PlanError> {
        let df = validate_dataflow(&program).map_err(PlanError::InvalidPlan)?;
        Ok(Self { program, dataflow: df.dag, provenance })
    }
}

/// Up to `limit` distinct valid orderings of the candidate's statements;
/// element 0 is the candidate's own order.
pub fn enumerate_orderings(candidate: &PlanCandidate, limit: usize) -> Vec<Program> {
    topological_orders(&candidate.dataflow, limit)
        .into_iter()
        .map(|order| {
            if order.iter().enumerate().all(|(i, &k)| i == k) {
                candidate.program.clone()
            } else {
                candidate.program.permuted(&order)
            }
        })
        .collect()
}

/// Template match followed by ordering expansion. The first candidate is
/// the template's own program; the rest are its reorderings.
pub fn plan_from_instruction(instruction: &str, scene: &SceneSummary) -> Result<Vec<PlanCandidate>, PlanError> {
    plan_with_limit(instruction, scene, DEFAULT_ORDERING_LIMIT)
}

pub fn plan_with_limit(instruction: &str, scene: &SceneSummary, limit: usize) -> Result<Vec<PlanCandidate>, PlanError> {
    let (id, program) = match_template(instruction, scene)?;
    let base = PlanCandidate::new(program, Provenance::Template(id.to_string()))?;
    let mut out = Vec::new();
    for (i, program) in enumerate_orderings(&base, limit.max(1)).into_iter().enumerate() {
        if i == 0 {
            out.push(base.clone());
        } else {
            out.push(PlanCandidate::new(program, Provenance::ReorderingOf(0))?);
        }
    }
    Ok(out)
}
