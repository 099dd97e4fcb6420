//! Pieces shared by the `visprog` binary and the examples.

use std::path::Path;

use thiserror::Error;

use crate::backends::{ProviderBinding, Registry};
use crate::dsl::{parse_program, Diagnostic, Program};
use crate::executor::ExecError;
use crate::geometry::ImageBuffer;
use crate::inversion::TranslateConfig;
use crate::planner::validate_dataflow;
use super::AblateError;

/// CLI failure classes; [`CliError::exit_code`] gives the process status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Plan(String),
    #[error(transparent)]
    Exec(ExecError),
    #[error(transparent)]
    Ablate(AblateError),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Plan(_) => 2,
            CliError::Exec(ExecError::Io { .. }) | CliError::Io(_) => 4,
            CliError::Ablate(AblateError::EmptySweep | AblateError::Selector(_)) => 2,
            CliError::Exec(_) | CliError::Ablate(_) => 3,
        }
    }
}

impl From<AblateError> for CliError {
    fn from(e: AblateError) -> Self {
        CliError::Ablate(e)
    }
}

impl From<ExecError> for CliError {
    fn from(e: ExecError) -> Self {
        CliError::Exec(e)
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Translation settings from a JSON file with keys `T`, `N`, `eta`, `beta`,
/// `mode`, `seed`.
pub fn load_config(path: &Path) -> Result<TranslateConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Stub registry with `role=url` overrides layered on top.
pub fn build_registry(config: Option<TranslateConfig>, backends: &[String]) -> Result<Registry, CliError> {
    let mut reg = Registry::stubs();
    if let Some(cfg) = config {
        reg = reg.with_translate_config(cfg);
    }
    for spec in backends {
        let binding = ProviderBinding::parse(spec).map_err(|e| CliError::Parse(e.to_string()))?;
        reg = reg.register(binding).map_err(|e| CliError::Parse(e.to_string()))?;
    }
    Ok(reg)
}

pub fn read_image(path: &Path) -> Result<ImageBuffer, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    ImageBuffer::from_png(&bytes).map_err(|e| io_error(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn render_diagnostics(path: &Path, diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("{}:{d}", path.display())).collect::<Vec<_>>().join("\n")
}

/// Parse and dataflow-check a program file.
pub fn read_program(path: &Path) -> Result<Program, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let program = parse_program(&text).map_err(|d| CliError::Parse(render_diagnostics(path, &d)))?;
    validate_dataflow(&program).map_err(|d| CliError::Parse(render_diagnostics(path, &d)))?;
    Ok(program)
}
