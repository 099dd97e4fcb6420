//! The visual-program language.
//!
//! A program is a straight-line list of single-assignment statements:
//!
//! ```text
//! # comments start with '#'
//! OBJ0 = Segment(IMAGE, "left dog")
//! BG   = Inpaint(IMAGE, OBJ0)
//! OBJ1 = Translate(OBJ0, "dog", "sheep")
//! OUT  = Paste(BG, OBJ1)
//! ```
//!
//! `IMAGE` is the reserved input variable. The string argument of `Segment`
//! is parsed with the selector sub-language (see [`parse_selector`]).

mod parser;
mod selector;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use parser::parse_program;
pub use selector::{parse_selector, Positional, Selector, SelectorError};

/// Reserved name of the program input.
pub const INPUT_VAR: &str = "IMAGE";

/// Registered operation vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "PG")]
    Pg,
    Segment,
    Inpaint,
    Translate,
    Move,
    Scale,
    Swap,
    Paste,
    Load,
    Save,
}

impl Op {
    pub const ALL: [Op; 10] = [
        Op::Pg,
        Op::Segment,
        Op::Inpaint,
        Op::Translate,
        Op::Move,
        Op::Scale,
        Op::Swap,
        Op::Paste,
        Op::Load,
        Op::Save,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::Pg => "PG",
            Op::Segment => "Segment",
            Op::Inpaint => "Inpaint",
            Op::Translate => "Translate",
            Op::Move => "Move",
            Op::Scale => "Scale",
            Op::Swap => "Swap",
            Op::Paste => "Paste",
            Op::Load => "Load",
            Op::Save => "Save",
        }
    }

    pub fn from_name(name: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.name() == name)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Arg {
    Number(f64),
    Str(String),
    Ref(String),
    Selector(Selector),
}

impl Arg {
    pub fn as_ref_name(&self) -> Option<&str> {
        match self {
            Arg::Ref(name) => Some(name),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        !matches!(self, Arg::Ref(_))
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Number(v) => write!(f, "{v}"),
            Arg::Str(s) => write_quoted(f, s),
            Arg::Ref(name) => f.write_str(name),
            Arg::Selector(sel) => write_quoted(f, &sel.to_string()),
        }
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statement {
    pub output_var: String,
    pub op: Op,
    pub args: Vec<Arg>,
}

impl Statement {
    pub fn new(output_var: impl Into<String>, op: Op, args: Vec<Arg>) -> Self {
        Self { output_var: output_var.into(), op, args }
    }

    /// Variables this statement reads, in argument order.
    pub fn inputs(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Arg::as_ref_name)
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}(", self.output_var, self.op)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{arg}")?;
        }
        f.write_str(")")
    }
}

/// A parsed program. Equality compares statements only; the source text and
/// line table are provenance.
#[derive(Clone, Debug, Default)]
pub struct Program {
    pub statements: Vec<Statement>,
    pub source_text: String,
    lines: Vec<usize>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.statements == other.statements
    }
}

impl Program {
    /// Build from statements; source text is the canonical print.
    pub fn from_statements(statements: Vec<Statement>) -> Self {
        let mut program = Program { statements, source_text: String::new(), lines: Vec::new() };
        program.source_text = print_program(&program);
        program.lines = (1..=program.statements.len()).collect();
        program
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    /// 1-based source line of statement `index`.
    pub fn line_of(&self, index: usize) -> usize {
        self.lines.get(index).copied().unwrap_or(index + 1)
    }

    /// Same statements in a new order (`order[k]` = old index placed at k).
    pub fn permuted(&self, order: &[usize]) -> Program {
        Program::from_statements(order.iter().map(|&i| self.statements[i].clone()).collect())
    }
}

/// Canonical text: one statement per line, each terminated by `\n`.
pub fn print_program(program: &Program) -> String {
    program.statements.iter().map(|s| format!("{s}\n")).collect()
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_program(self))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    SyntaxError,
    UnknownOperation,
    DuplicateAssignment,
    UseBeforeDef,
    UnusedOutput,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A located message; `line` and `column` are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub severity: Severity,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn error(kind: DiagnosticKind, line: usize, column: usize, message: impl Into<String>) -> Self {
        Self { kind, severity: Severity::Error, line, column, message: message.into() }
    }

    pub fn warning(kind: DiagnosticKind, line: usize, column: usize, message: impl Into<String>) -> Self {
        Self { kind, severity: Severity::Warning, line, column, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
