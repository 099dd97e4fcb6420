use std::collections::HashMap;

use super::{
    is_identifier, parse_selector, Arg, Diagnostic, DiagnosticKind, Op, Program, Statement, INPUT_VAR,
};

/// Parse a whole program. All lines are checked; every problem found is
/// returned, each with its 1-based line and column.
pub fn parse_program(source: &str) -> Result<Program, Vec<Diagnostic>> {
    let mut statements = Vec::new();
    let mut lines = Vec::new();
    let mut diagnostics = Vec::new();
    let mut defined: HashMap<String, usize> = HashMap::new();

    for (idx, text) in source.lines().enumerate() {
        let line_no = idx + 1;
        match LineParser::new(text, line_no).parse() {
            Ok(None) => {}
            Ok(Some((stmt, var_col))) => {
                if stmt.output_var == INPUT_VAR {
                    diagnostics.push(Diagnostic::error(
                        DiagnosticKind::DuplicateAssignment,
                        line_no,
                        var_col,
                        format!("`{INPUT_VAR}` is the program input and cannot be assigned"),
                    ));
                } else if let Some(first) = defined.get(&stmt.output_var) {
                    diagnostics.push(Diagnostic::error(
                        DiagnosticKind::DuplicateAssignment,
                        line_no,
                        var_col,
                        format!("`{}` already assigned on line {first}", stmt.output_var),
                    ));
                } else {
                    defined.insert(stmt.output_var.clone(), line_no);
                }
                statements.push(stmt);
                lines.push(line_no);
            }
            Err(d) => diagnostics.push(d),
        }
    }

    if diagnostics.is_empty() {
        Ok(Program { statements, source_text: source.to_string(), lines })
    } else {
        Err(diagnostics)
    }
}

struct LineParser<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _text: &'a str,
}

type LineResult<T> = Result<T, Diagnostic>;

impl<'a> LineParser<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Self { chars: text.chars().collect(), pos: 0, line, _text: text }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t' || c == '\r') {
            self.pos += 1;
        }
    }

    fn at_end_or_comment(&self) -> bool {
        matches!(self.peek(), None | Some('#'))
    }

    fn syntax(&self, message: impl Into<String>) -> Diagnostic {
        Diagnostic::error(DiagnosticKind::SyntaxError, self.line, self.column(), message)
    }

    fn expect(&mut self, want: char) -> LineResult<()> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(self.syntax(format!("expected `{want}`, found `{c}`"))),
            None => Err(self.syntax(format!("expected `{want}`, found end of line"))),
        }
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn identifier(&mut self, what: &str) -> LineResult<(String, usize)> {
        self.skip_ws();
        let col = self.column();
        let w = self.word();
        if w.is_empty() {
            return Err(self.syntax(format!("expected {what}")));
        }
        if !is_identifier(&w) {
            return Err(Diagnostic::error(
                DiagnosticKind::SyntaxError,
                self.line,
                col,
                format!("`{w}` is not a valid {what}"),
            ));
        }
        Ok((w, col))
    }

    /// `None` for blank and comment-only lines.
    fn parse(mut self) -> LineResult<Option<(Statement, usize)>> {
        self.skip_ws();
        if self.at_end_or_comment() {
            return Ok(None);
        }
        let (output_var, var_col) = self.identifier("variable name")?;
        self.expect('=')?;
        self.skip_ws();
        let op_col = self.column();
        let op_name = self.word();
        if op_name.is_empty() {
            return Err(self.syntax("expected operation name"));
        }
        let op = Op::from_name(&op_name).ok_or_else(|| {
            Diagnostic::error(
                DiagnosticKind::UnknownOperation,
                self.line,
                op_col,
                format!("unknown operation `{op_name}`"),
            )
        })?;
        self.expect('(')?;
        let mut args = Vec::new();
        self.skip_ws();
        if self.peek() == Some(')') {
            self.pos += 1;
        } else {
            loop {
                let index = args.len();
                args.push(self.arg(op, index)?);
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => return Err(self.syntax(format!("expected `,` or `)`, found `{c}`"))),
                    None => return Err(self.syntax("unclosed argument list")),
                }
            }
        }
        self.skip_ws();
        if !self.at_end_or_comment() {
            return Err(self.syntax("unexpected text after statement"));
        }
        Ok(Some((Statement { output_var, op, args }, var_col)))
    }

    fn arg(&mut self, op: Op, index: usize) -> LineResult<Arg> {
        self.skip_ws();
        let col = self.column();
        match self.peek() {
            Some('"') => {
                let s = self.string()?;
                if op == Op::Segment && index == 1 {
                    parse_selector(&s).map(Arg::Selector).map_err(|e| {
                        Diagnostic::error(DiagnosticKind::SyntaxError, self.line, col, e.to_string())
                    })
                } else {
                    Ok(Arg::Str(s))
                }
            }
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => self.identifier("variable name").map(|(n, _)| Arg::Ref(n)),
            Some(c) => Err(self.syntax(format!("unexpected `{c}` in argument list"))),
            None => Err(self.syntax("expected argument")),
        }
    }

    fn string(&mut self) -> LineResult<String> {
        let start_col = self.column();
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => {
                    return Err(Diagnostic::error(
                        DiagnosticKind::SyntaxError,
                        self.line,
                        start_col,
                        "unterminated string",
                    ))
                }
                Some('"') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('\\') => {
                    self.pos += 1;
                    let esc = match self.peek() {
                        Some('"') => '"',
                        Some('\\') => '\\',
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('r') => '\r',
                        Some(c) => return Err(self.syntax(format!("unknown escape `\\{c}`"))),
                        None => return Err(self.syntax("unterminated escape")),
                    };
                    out.push(esc);
                    self.pos += 1;
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn number(&mut self) -> LineResult<Arg> {
        let start = self.pos;
        let col = self.column();
        if matches!(self.peek(), Some('-' | '+')) {
            self.pos += 1;
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some('-' | '+')) {
                self.pos += 1;
            }
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Arg::Number(v)),
            _ => Err(Diagnostic::error(
                DiagnosticKind::SyntaxError,
                self.line,
                col,
                format!("malformed number `{text}`"),
            )),
        }
    }
}
