use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{validate_dataflow, PlanError, SceneSegment, SceneSummary};
use crate::backends::http::{post_json, DEFAULT_TIMEOUT_MS};
use crate::dsl::{parse_program, print_program, Program};

pub const LLM_MAX_LENGTH: u32 = 256;
pub const LLM_TEMPERATURE: u32 = 0;

/// An (instruction, program text) pair shown to the model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub instruction: String,
    pub program: String,
}

/// One exemplar per template, rendered against a two-object scene.
pub fn default_exemplars() -> Vec<Exemplar> {
    let scene = SceneSummary {
        segments: vec![
            SceneSegment { label: "dog".into(), centroid: (30.0, 50.0), area: 400 },
            SceneSegment { label: "dog".into(), centroid: (70.0, 50.0), area: 400 },
            SceneSegment { label: "cat".into(), centroid: (50.0, 20.0), area: 200 },
        ],
        image_size: (100, 100),
    };
    [
        "change the left dog to a sheep",
        "move the cat down by 20%",
        "enlarge the right dog",
        "swap the two dogs",
        "remove the cat",
    ]
    .iter()
    .map(|instruction| {
        let (_, program) = super::match_template(instruction, &scene).expect("exemplar matches its template");
        Exemplar { instruction: instruction.to_string(), program: print_program(&program) }
    })
    .collect()
}

pub fn llm_request_body(instruction: &str, exemplars: &[Exemplar]) -> Value {
    json!({
        "role": "planner",
        "instruction": instruction,
        "exemplars": exemplars,
        "max_length": LLM_MAX_LENGTH,
        "temperature": LLM_TEMPERATURE,
    })
}

/// Ask a planner endpoint for a program; the reply (`{"program": text}`) is
/// parsed and dataflow-checked before it is accepted.
pub fn llm_plan_request(instruction: &str, exemplars: &[Exemplar], endpoint: &str) -> Result<Program, PlanError> {
    llm_plan_request_with_timeout(instruction, exemplars, endpoint, DEFAULT_TIMEOUT_MS)
}

pub fn llm_plan_request_with_timeout(
    instruction: &str,
    exemplars: &[Exemplar],
    endpoint: &str,
    timeout_ms: u64,
) -> Result<Program, PlanError> {
    if exemplars.is_empty() {
        return Err(PlanError::NoExemplars);
    }
    let body = llm_request_body(instruction, exemplars);
    let (status, text) = post_json(endpoint, &body.to_string(), timeout_ms).map_err(PlanError::TransportError)?;
    if !(200..300).contains(&status) {
        return Err(PlanError::TransportError(format!("HTTP {status}: {text}")));
    }
    let raw = match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => match map.get("program") {
            Some(Value::String(p)) => p.clone(),
            _ => text,
        },
        _ => text,
    };
    let program = parse_program(&raw).map_err(|diagnostics| PlanError::InvalidProgramReturned { raw: raw.clone(), diagnostics })?;
    if program.is_empty() {
        return Err(PlanError::InvalidProgramReturned { raw, diagnostics: vec![] });
    }
    validate_dataflow(&program).map_err(|diagnostics| PlanError::InvalidProgramReturned { raw: raw.clone(), diagnostics })?;
    Ok(program)
}
