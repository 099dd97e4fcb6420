//! Statement-by-statement interpreter.
//!
//! [`step`] runs the statement at the program counter, binds its output and
//! appends a [`StepTrace`]; [`repeat`] re-runs the last statement (optionally
//! with a different provider or literal argument); [`rollback`] steps back by
//! replaying from the start.

mod store;
mod trace;
mod value;

use std::collections::BTreeMap;
use std::time::Instant;

use indexmap::IndexMap;
use thiserror::Error;

use crate::backends::{invoke, BackendError, ProviderBinding, ProviderCall, Registry, Role};
use crate::dsl::{parse_selector, Arg, Op, Program, Selector, Statement, INPUT_VAR};
use crate::geometry::{move_roi, paste, resolve_selector, round_half_up, scale_roi, swap_rois_with, Direction, GeometryError, ImageBuffer, Roi};
use crate::inversion::fnv64;

pub use store::ArtifactStore;
pub use trace::{parse_trace_json, render_trace, trace_json, Report, StepTrace, VarSummary};
pub use value::{hex_digest, Tag, Value};

/// Longest side of step thumbnails.
pub const THUMBNAIL_SIDE: u32 = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("input image is empty")]
    EmptyImage,
    #[error("program already complete")]
    ProgramComplete,
    #[error("no statement has run yet")]
    NothingToRepeat,
    #[error("statement {line}: `{var}` is not bound")]
    UseBeforeDef { line: usize, var: String },
    #[error("statement {line}: {message}")]
    TypeMismatch { line: usize, message: String },
    #[error("statement {line}: {role} failed: {error}")]
    ProviderError { line: usize, role: Role, error: BackendError },
    #[error("statement {line}: {error}")]
    Geometry { line: usize, error: GeometryError },
    #[error("statement {line}: {message}")]
    Io { line: usize, message: String },
    #[error("invalid override: {0}")]
    InvalidOverride(String),
    #[error("artifact `{0}` not found")]
    MissingArtifact(String),
    #[error("malformed trace: {0}")]
    BadTrace(String),
}

impl ExecError {
    /// Statement index the error belongs to, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            ExecError::UseBeforeDef { line, .. }
            | ExecError::TypeMismatch { line, .. }
            | ExecError::ProviderError { line, .. }
            | ExecError::Geometry { line, .. }
            | ExecError::Io { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Variable bindings, program counter and history of one execution.
#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionState {
    pub bindings: IndexMap<String, Value>,
    pub pc: usize,
    pub history: Vec<StepTrace>,
    pub rng_seed: u64,
}

impl ExecutionState {
    pub fn input(&self) -> &ImageBuffer {
        self.bindings[INPUT_VAR].as_image().expect("IMAGE is bound to an image")
    }

    /// Digest over pc, seed and every binding in order.
    pub fn digest(&self) -> u64 {
        let mut buf = Vec::new();
        buf.extend((self.pc as u64).to_le_bytes());
        buf.extend(self.rng_seed.to_le_bytes());
        for (name, v) in &self.bindings {
            buf.extend((name.len() as u64).to_le_bytes());
            buf.extend(name.as_bytes());
            buf.extend(v.digest().to_le_bytes());
        }
        fnv64(&buf)
    }
}

pub fn init_state(image: ImageBuffer, seed: u64) -> Result<ExecutionState, ExecError> {
    if image.width() == 0 || image.height() == 0 {
        return Err(ExecError::EmptyImage);
    }
    let mut bindings = IndexMap::new();
    bindings.insert(INPUT_VAR.to_string(), Value::Image(image));
    Ok(ExecutionState { bindings, pc: 0, history: Vec::new(), rng_seed: seed })
}

/// Changes applied to a repeated statement.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    /// Provider bindings layered over the registry for this run only.
    pub bindings: Vec<ProviderBinding>,
    /// Replacement literal arguments, by argument index.
    pub args: BTreeMap<usize, Arg>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty() && self.args.is_empty()
    }
}

/// Execute the statement at `pc`.
pub fn step(
    state: &mut ExecutionState,
    program: &Program,
    registry: &Registry,
    store: &ArtifactStore,
) -> Result<StepTrace, ExecError> {
    let Some(statement) = program.statements.get(state.pc) else {
        return Err(ExecError::ProgramComplete);
    };
    let trace = execute(state, state.pc, statement, registry, store, 0)?;
    state.pc += 1;
    state.history.push(trace.clone());
    Ok(trace)
}

/// Re-run statement `pc − 1`, replacing its binding and its history entry.
pub fn repeat(
    state: &mut ExecutionState,
    program: &Program,
    registry: &Registry,
    store: &ArtifactStore,
    overrides: &Overrides,
) -> Result<StepTrace, ExecError> {
    if state.pc == 0 {
        return Err(ExecError::NothingToRepeat);
    }
    let index = state.pc - 1;
    let mut statement = program.statements[index].clone();
    for (&i, arg) in &overrides.args {
        match (statement.args.get(i), arg) {
            (None, _) => return Err(ExecError::InvalidOverride(format!("statement has no argument {i}"))),
            (Some(Arg::Ref(_)), _) => return Err(ExecError::InvalidOverride(format!("argument {i} is a variable"))),
            (Some(_), Arg::Ref(_)) => return Err(ExecError::InvalidOverride("replacement must be a literal".into())),
            _ => statement.args[i] = arg.clone(),
        }
    }
    let mut reg = registry.clone();
    for b in &overrides.bindings {
        reg = reg.register(b.clone()).map_err(|e| ExecError::InvalidOverride(e.to_string()))?;
    }
    let previous = state.history.get(index).map_or(0, |t| t.repeat_count);
    let trace = execute(state, index, &statement, &reg, store, previous + 1)?;
    state.history.truncate(index);
    state.history.push(trace.clone());
    Ok(trace)
}

/// Step back one statement by replaying the first `pc − 1` statements from
/// the input image. Repeat overrides are not replayed.
pub fn rollback(
    state: &mut ExecutionState,
    program: &Program,
    registry: &Registry,
    store: &ArtifactStore,
) -> Result<(), ExecError> {
    if state.pc == 0 {
        return Err(ExecError::NothingToRepeat);
    }
    let target = state.pc - 1;
    let mut fresh = init_state(state.input().clone(), state.rng_seed)?;
    while fresh.pc < target {
        step(&mut fresh, program, registry, store)?;
    }
    *state = fresh;
    Ok(())
}

/// Run a whole program; the result is the last statement's value (the
/// input image for an empty program).
pub fn run(
    program: &Program,
    image: ImageBuffer,
    registry: &Registry,
    seed: u64,
    store: &ArtifactStore,
) -> Result<(Value, Vec<StepTrace>), ExecError> {
    let mut state = init_state(image, seed)?;
    while state.pc < program.len() {
        step(&mut state, program, registry, store)?;
    }
    let final_value = match program.statements.last() {
        Some(s) => state.bindings[&s.output_var].clone(),
        None => state.bindings[INPUT_VAR].clone(),
    };
    Ok((final_value, state.history))
}

fn execute(
    state: &mut ExecutionState,
    line: usize,
    statement: &Statement,
    registry: &Registry,
    store: &ArtifactStore,
    repeat_count: u32,
) -> Result<StepTrace, ExecError> {
    let started = Instant::now();
    let mut inputs = Vec::new();
    for var in statement.inputs() {
        let v = state
            .bindings
            .get(var)
            .ok_or_else(|| ExecError::UseBeforeDef { line, var: var.to_string() })?;
        inputs.push(VarSummary { name: var.to_string(), tag: v.tag(), digest: hex_digest(v.digest()) });
    }
    let ctx = Ctx { state, line, statement, registry };
    let value = ctx.eval()?;
    let artifacts = thumbnails(&value).into_iter().map(|png| store.put(png)).collect();
    let output = VarSummary { name: statement.output_var.clone(), tag: value.tag(), digest: hex_digest(value.digest()) };
    state.bindings.insert(statement.output_var.clone(), value);
    Ok(StepTrace {
        line,
        op: statement.op.name().to_string(),
        inputs,
        output,
        artifacts,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        repeat_count,
    })
}

fn thumbnails(v: &Value) -> Vec<Vec<u8>> {
    match v {
        Value::Image(img) => vec![img.thumbnail(THUMBNAIL_SIDE).to_png()],
        Value::Region(r) => vec![r.patch().thumbnail(THUMBNAIL_SIDE).to_png()],
        Value::RegionList(rs) => rs.iter().map(|r| r.patch().thumbnail(THUMBNAIL_SIDE).to_png()).collect(),
        Value::Prompt(_) | Value::Number(_) => Vec::new(),
    }
}

enum SwapFailure {
    Geometry(GeometryError),
    Provider(BackendError),
}

impl From<GeometryError> for SwapFailure {
    fn from(e: GeometryError) -> Self {
        SwapFailure::Geometry(e)
    }
}

struct Ctx<'a> {
    state: &'a ExecutionState,
    line: usize,
    statement: &'a Statement,
    registry: &'a Registry,
}

impl Ctx<'_> {
    fn mismatch(&self, message: impl Into<String>) -> ExecError {
        ExecError::TypeMismatch { line: self.line, message: format!("{}: {}", self.statement.op, message.into()) }
    }

    fn geo(&self, error: GeometryError) -> ExecError {
        ExecError::Geometry { line: self.line, error }
    }

    fn provider(&self, call: ProviderCall) -> Result<Value, ExecError> {
        let role = call.role();
        invoke(self.registry, &call).map_err(|error| ExecError::ProviderError { line: self.line, role, error })
    }

    fn arity(&self, allowed: &[usize]) -> Result<(), ExecError> {
        let n = self.statement.args.len();
        if allowed.contains(&n) {
            Ok(())
        } else {
            Err(self.mismatch(format!("expected {allowed:?} arguments, got {n}")))
        }
    }

    fn value(&self, i: usize) -> Result<&Value, ExecError> {
        match &self.statement.args[i] {
            Arg::Ref(name) => self
                .state
                .bindings
                .get(name)
                .ok_or_else(|| ExecError::UseBeforeDef { line: self.line, var: name.clone() }),
            other => Err(self.mismatch(format!("argument {i} must be a variable, got {other}"))),
        }
    }

    fn image(&self, i: usize) -> Result<&ImageBuffer, ExecError> {
        match self.value(i)? {
            Value::Image(img) => Ok(img),
            v => Err(self.mismatch(format!("argument {i} must be an image, got {}", v.tag()))),
        }
    }

    fn region(&self, i: usize) -> Result<&Roi, ExecError> {
        match self.value(i)? {
            Value::Region(r) => Ok(r),
            v => Err(self.mismatch(format!("argument {i} must be a region, got {}", v.tag()))),
        }
    }

    fn text(&self, i: usize) -> Result<String, ExecError> {
        match &self.statement.args[i] {
            Arg::Str(s) => Ok(s.clone()),
            Arg::Selector(s) => Ok(s.to_string()),
            Arg::Ref(_) => match self.value(i)? {
                Value::Prompt(s) => Ok(s.clone()),
                v => Err(self.mismatch(format!("argument {i} must be a prompt, got {}", v.tag()))),
            },
            Arg::Number(n) => Err(self.mismatch(format!("argument {i} must be text, got {n}"))),
        }
    }

    fn number(&self, i: usize) -> Result<f64, ExecError> {
        match &self.statement.args[i] {
            Arg::Number(n) => Ok(*n),
            Arg::Ref(_) => match self.value(i)? {
                Value::Number(n) => Ok(*n),
                v => Err(self.mismatch(format!("argument {i} must be a number, got {}", v.tag()))),
            },
            other => Err(self.mismatch(format!("argument {i} must be a number, got {other}"))),
        }
    }

    fn selector(&self, i: usize) -> Result<Selector, ExecError> {
        match &self.statement.args[i] {
            Arg::Selector(s) => Ok(s.clone()),
            _ => parse_selector(&self.text(i)?).map_err(|e| self.mismatch(e.to_string())),
        }
    }

    fn eval(&self) -> Result<Value, ExecError> {
        match self.statement.op {
            Op::Pg => {
                self.arity(&[1])?;
                match self.value(0)? {
                    Value::Image(img) => self.provider(ProviderCall::Describe(img.clone())),
                    Value::Region(r) => self.provider(ProviderCall::DescribeRegion(r.clone())),
                    v => Err(self.mismatch(format!("argument 0 must be an image or region, got {}", v.tag()))),
                }
            }
            Op::Segment => {
                self.arity(&[2])?;
                let image = self.image(0)?;
                let selector = self.selector(1)?;
                let Value::RegionList(rois) = self.provider(ProviderCall::Segment(image.clone()))? else {
                    unreachable!("segmenter results are checked by the backend")
                };
                resolve_selector(&rois, &selector).map(Value::Region).map_err(|e| ExecError::ProviderError {
                    line: self.line,
                    role: Role::Segmenter,
                    error: BackendError::Geometry(e),
                })
            }
            Op::Inpaint => {
                self.arity(&[2])?;
                let image = self.image(0)?;
                let region = self.region(1)?;
                self.provider(ProviderCall::Inpaint { image: image.clone(), mask: region.mask().clone() })
            }
            Op::Translate => {
                self.arity(&[3])?;
                let region = self.region(0)?;
                let (source, target) = (self.text(1)?, self.text(2)?);
                let mut config = self.registry.translate_config().clone();
                config.seed = self.state.rng_seed;
                self.provider(ProviderCall::Translate { region: region.clone(), source, target, config })
            }
            Op::Move => {
                self.arity(&[3])?;
                let region = self.region(0)?;
                let dir: Direction = self.text(1)?.parse().map_err(|e: String| self.mismatch(e))?;
                let amount = self.number(2)?;
                if !(amount.is_finite() && amount >= 0.0) {
                    return Err(self.mismatch(format!("move amount must be a non-negative number, got {amount}")));
                }
                let amount = round_half_up(amount).min(u32::MAX as i64) as u32;
                move_roi(region, dir, amount, region.frame()).map(Value::Region).map_err(|e| self.geo(e))
            }
            Op::Scale => {
                self.arity(&[2])?;
                let region = self.region(0)?;
                scale_roi(region, self.number(1)?, region.frame()).map(Value::Region).map_err(|e| self.geo(e))
            }
            Op::Swap => {
                self.arity(&[3])?;
                let image = self.image(0)?;
                let (a, b) = (self.region(1)?, self.region(2)?);
                let fill = |img: &ImageBuffer, mask: &crate::geometry::Mask| -> Result<ImageBuffer, SwapFailure> {
                    match invoke(self.registry, &ProviderCall::Inpaint { image: img.clone(), mask: mask.clone() }) {
                        Ok(Value::Image(out)) => Ok(out),
                        Ok(_) => unreachable!("inpainter results are checked by the backend"),
                        Err(e) => Err(SwapFailure::Provider(e)),
                    }
                };
                match swap_rois_with(image, a, b, fill) {
                    Ok(img) => Ok(Value::Image(img)),
                    Err(SwapFailure::Geometry(e)) => Err(self.geo(e)),
                    Err(SwapFailure::Provider(error)) => {
                        Err(ExecError::ProviderError { line: self.line, role: Role::Inpainter, error })
                    }
                }
            }
            Op::Paste => {
                self.arity(&[2, 4])?;
                let background = self.image(0)?;
                let region = self.region(1)?;
                let at = if self.statement.args.len() == 4 { Some((self.number(2)?, self.number(3)?)) } else { None };
                paste(background, region, at).map(Value::Image).map_err(|e| self.geo(e))
            }
            Op::Load => {
                self.arity(&[1])?;
                let path = self.text(0)?;
                let bytes = std::fs::read(&path).map_err(|e| ExecError::Io { line: self.line, message: format!("{path}: {e}") })?;
                ImageBuffer::from_png(&bytes).map(Value::Image).map_err(|e| ExecError::Io { line: self.line, message: format!("{path}: {e}") })
            }
            Op::Save => {
                self.arity(&[2])?;
                let image = self.image(0)?;
                let path = self.text(1)?;
                std::fs::write(&path, image.to_png()).map_err(|e| ExecError::Io { line: self.line, message: format!("{path}: {e}") })?;
                Ok(Value::Image(image.clone()))
            }
        }
    }
}
