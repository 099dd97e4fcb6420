use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{ArtifactStore, ExecError, Tag};

/// Name, type tag and content digest of one variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSummary {
    pub name: String,
    pub tag: Tag,
    /// 16 hex digits.
    pub digest: String,
}

/// Audit record of one executed statement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    /// 0-based statement index.
    pub line: usize,
    pub op: String,
    pub inputs: Vec<VarSummary>,
    pub output: VarSummary,
    pub artifacts: Vec<String>,
    /// Not serialized: it would break byte-identical replays.
    #[serde(skip)]
    pub wall_time_ms: f64,
    pub repeat_count: u32,
}

#[derive(Serialize, Deserialize)]
struct TraceDoc {
    steps: Vec<StepTrace>,
}

/// `{"steps": [...]}`.
pub fn trace_json(trace: &[StepTrace]) -> String {
    serde_json::to_string_pretty(&TraceDoc { steps: trace.to_vec() }).expect("trace serializes")
}

pub fn parse_trace_json(text: &str) -> Result<Vec<StepTrace>, ExecError> {
    serde_json::from_str::<TraceDoc>(text).map(|d| d.steps).map_err(|e| ExecError::BadTrace(e.to_string()))
}

/// Self-contained HTML report and its JSON twin.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub html: String,
    pub json: String,
}

pub fn render_trace(trace: &[StepTrace], store: &ArtifactStore) -> Result<Report, ExecError> {
    let mut html = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Execution trace</title>\n\
         <style>body{font-family:sans-serif}section{border-top:1px solid #ccc;padding:.5em 0}\
         img{image-rendering:pixelated;border:1px solid #999;margin-right:4px;width:128px}\
         code{background:#f4f4f4}</style></head><body>\n",
    );
    html.push_str(&format!("<h1>Execution trace</h1>\n<p>{} step(s)</p>\n", trace.len()));
    for step in trace {
        html.push_str(&format!(
            "<section id=\"step-{}\"><h2>Statement {}: {}</h2>\n",
            step.line,
            step.line,
            escape(&step.op)
        ));
        if step.repeat_count > 0 {
            html.push_str(&format!("<p>repeated {} time(s)</p>\n", step.repeat_count));
        }
        html.push_str("<ul>\n");
        for input in &step.inputs {
            html.push_str(&format!("<li>in <code>{}</code></li>\n", summary(input)));
        }
        html.push_str(&format!("<li>out <code>{}</code></li>\n</ul>\n", summary(&step.output)));
        for id in &step.artifacts {
            let bytes = store.get(id).ok_or_else(|| ExecError::MissingArtifact(id.clone()))?;
            html.push_str(&format!(
                "<img alt=\"{}\" src=\"data:image/png;base64,{}\">\n",
                escape(id),
                STANDARD.encode(bytes.as_slice())
            ));
        }
        html.push_str("</section>\n");
    }
    html.push_str("</body></html>\n");
    Ok(Report { html, json: trace_json(trace) })
}

fn summary(v: &super::VarSummary) -> String {
    format!("{} : {} #{}", escape(&v.name), v.tag, escape(&v.digest))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
