use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dsl::{Diagnostic, DiagnosticKind, Program, Severity, INPUT_VAR};

/// Def→use graph over statement indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dag {
    pub nodes: usize,
    /// Sorted, de-duplicated `(def, use)` pairs.
    pub edges: Vec<(usize, usize)>,
}

impl Dag {
    pub fn predecessors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.1 == node).map(|e| e.0)
    }

    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == node).map(|e| e.1)
    }

    /// True when `order` lists every node once and respects every edge.
    pub fn is_topological(&self, order: &[usize]) -> bool {
        if order.len() != self.nodes {
            return false;
        }
        let mut pos = vec![usize::MAX; self.nodes];
        for (i, &n) in order.iter().enumerate() {
            if n >= self.nodes || pos[n] != usize::MAX {
                return false;
            }
            pos[n] = i;
        }
        self.edges.iter().all(|&(a, b)| pos[a] < pos[b])
    }
}

/// Dataflow check result: the graph plus warning-level diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataflow {
    pub dag: Dag,
    pub warnings: Vec<Diagnostic>,
}

/// Every read must name `IMAGE` or an earlier output. Outputs nobody reads
/// (other than the final statement's) draw an `UnusedOutput` warning.
/// On failure all diagnostics, warnings included, are returned.
pub fn validate_dataflow(program: &Program) -> Result<Dataflow, Vec<Diagnostic>> {
    let source_lines: Vec<&str> = program.source_text.lines().collect();
    let mut defs: HashMap<&str, usize> = HashMap::new();
    let mut edges = BTreeSet::new();
    let mut used = vec![false; program.len()];
    let mut errors = Vec::new();

    for (i, st) in program.statements.iter().enumerate() {
        for var in st.inputs() {
            if var == INPUT_VAR {
                continue;
            }
            match defs.get(var) {
                Some(&d) => {
                    edges.insert((d, i));
                    used[d] = true;
                }
                None => {
                    let line = program.line_of(i);
                    errors.push(Diagnostic::error(
                        DiagnosticKind::UseBeforeDef,
                        line,
                        column_of(&source_lines, line, var),
                        format!("`{var}` used before definition"),
                    ));
                }
            }
        }
        defs.entry(&st.output_var).or_insert(i);
    }

    let mut warnings = Vec::new();
    for (i, st) in program.statements.iter().enumerate() {
        if !used[i] && i + 1 != program.len() {
            let line = program.line_of(i);
            warnings.push(Diagnostic::warning(
                DiagnosticKind::UnusedOutput,
                line,
                column_of(&source_lines, line, &st.output_var),
                format!("`{}` is never used", st.output_var),
            ));
        }
    }

    if errors.is_empty() {
        Ok(Dataflow { dag: Dag { nodes: program.len(), edges: edges.into_iter().collect() }, warnings })
    } else {
        errors.extend(warnings);
        errors.sort_by_key(|d| (d.line, d.column, d.severity == Severity::Warning));
        Err(errors)
    }
}

/// 1-based column of the first whole-word occurrence of `var`, or 1.
fn column_of(lines: &[&str], line: usize, var: &str) -> usize {
    let Some(text) = line.checked_sub(1).and_then(|i| lines.get(i)) else { return 1 };
    let is_word = |c: char| c.is_ascii_alphanumeric() || c == '_';
    let mut from = 0;
    while let Some(off) = text[from..].find(var) {
        let start = from + off;
        let end = start + var.len();
        let before_ok = text[..start].chars().next_back().is_none_or(|c| !is_word(c));
        let after_ok = text[end..].chars().next().is_none_or(|c| !is_word(c));
        if before_ok && after_ok {
            return text[..start].chars().count() + 1;
        }
        from = end;
    }
    1
}

/// Up to `limit` distinct topological orders of `dag`, lexicographically by
/// node index; for a program's own DAG the original order comes first.
pub fn topological_orders(dag: &Dag, limit: usize) -> Vec<Vec<usize>> {
    let n = dag.nodes;
    let mut indegree = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for &(a, b) in &dag.edges {
        indegree[b] += 1;
        succ[a].push(b);
    }
    let mut out = Vec::new();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    fn go(
        indegree: &mut [usize],
        succ: &[Vec<usize>],
        placed: &mut [bool],
        order: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        limit: usize,
    ) {
        if out.len() >= limit {
            return;
        }
        if order.len() == indegree.len() {
            out.push(order.clone());
            return;
        }
        for v in 0..indegree.len() {
            if placed[v] || indegree[v] != 0 {
                continue;
            }
            placed[v] = true;
            order.push(v);
            succ[v].iter().for_each(|&s| indegree[s] -= 1);
            go(indegree, succ, placed, order, out, limit);
            succ[v].iter().for_each(|&s| indegree[s] += 1);
            order.pop();
            placed[v] = false;
        }
    }
    go(&mut indegree, &succ, &mut placed, &mut order, &mut out, limit);
    out
}
