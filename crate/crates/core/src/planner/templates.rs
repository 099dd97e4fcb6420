use std::sync::LazyLock;

use regex::Regex;

use super::{PlanError, SceneSummary};
use crate::dsl::{parse_selector, Arg, Op, Positional, Program, Selector, Statement, INPUT_VAR};
use crate::geometry::{round_half_up, Direction};

/// Fraction of the image extent moved when the instruction gives no amount.
pub const DEFAULT_MOVE_FRACTION: f64 = 0.10;
pub const DEFAULT_ENLARGE: f64 = 2.0;
pub const DEFAULT_SHRINK: f64 = 0.5;

/// Template ids in match-priority order.
pub const TEMPLATE_IDS: [&str; 6] = ["swap-pair", "swap", "translate", "move", "scale", "remove"];

static SWAP_PAIR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^swap\s+(?:the\s+)?(?:two|2|both)\s+([a-z]+)$").unwrap());
static SWAP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^swap\s+(.+?)\s+(?:and|with)\s+(.+)$").unwrap());
static TRANSLATE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:change|translate|turn|convert|replace|transform)\s+(.+?)\s+(?:to|into|with)\s+(?:an?\s+|the\s+)?(.+)$")
        .unwrap()
});
static MOVE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:move|shift)\s+(.+?)\s+(?:to\s+the\s+)?(left|right|up|down)(?:wards?)?(?:\s+by\s+([0-9]+(?:\.[0-9]+)?)\s*(?:%|percent))?$")
        .unwrap()
});
static SCALE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(enlarge|shrink)\s+(.+?)(?:\s+by\s+(?:a\s+factor\s+of\s+)?([0-9]+(?:\.[0-9]+)?)\s*x?)?$").unwrap()
});
static REMOVE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:remove|delete|erase)\s+(.+)$").unwrap());

/// Lower-cased, whitespace-collapsed, trailing punctuation removed.
fn normalize(instruction: &str) -> String {
    let words: Vec<&str> = instruction.split_whitespace().collect();
    words.join(" ").trim_end_matches(['.', '!', '?', ',', ';']).to_lowercase()
}

pub(crate) fn singularize(word: &str) -> String {
    const IRREGULAR: [(&str, &str); 8] = [
        ("women", "woman"),
        ("men", "man"),
        ("sheep", "sheep"),
        ("wolves", "wolf"),
        ("mice", "mouse"),
        ("geese", "goose"),
        ("children", "child"),
        ("people", "person"),
    ];
    if let Some((_, s)) = IRREGULAR.iter().find(|(p, _)| *p == word) {
        return s.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for suffix in ["xes", "ches", "shes", "sses"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    match word.strip_suffix('s') {
        Some(stem) if !stem.ends_with('s') && !stem.is_empty() => stem.to_string(),
        _ => word.to_string(),
    }
}

fn selector(text: &str, scene: Option<&SceneSummary>) -> Result<Selector, PlanError> {
    let sel = parse_selector(text).map_err(|_| PlanError::NoTemplateMatch(text.to_string()))?;
    if let (Positional::All, Some(scene)) = (sel.positional, scene) {
        let matches = scene.count_label(&sel.class_name);
        if matches != 1 {
            return Err(PlanError::AmbiguousSelector { selector: sel.to_string(), matches });
        }
    }
    Ok(sel)
}

fn image() -> Arg {
    Arg::Ref(INPUT_VAR.into())
}

fn var(name: &str) -> Arg {
    Arg::Ref(name.into())
}

fn segment(out: &str, sel: Selector) -> Statement {
    Statement::new(out, Op::Segment, vec![image(), Arg::Selector(sel)])
}

/// Cut, fill the hole, edit the region, composite.
fn region_edit(sel: Selector, edit: Statement) -> Program {
    Program::from_statements(vec![
        segment("OBJ0", sel),
        Statement::new("BG0", Op::Inpaint, vec![image(), var("OBJ0")]),
        edit,
        Statement::new("OUT", Op::Paste, vec![var("BG0"), var("OBJ1")]),
    ])
}

/// First matching template: its id and program. Bare class selectors must
/// match exactly one scene segment.
pub fn match_template(instruction: &str, scene: &SceneSummary) -> Result<(&'static str, Program), PlanError> {
    match_inner(instruction, Some(scene), scene.image_size)
}

/// Template match without a scene: selectors are not grounded and move
/// amounts are computed for an image of `image_size`.
pub fn match_template_ungrounded(instruction: &str, image_size: (u32, u32)) -> Result<(&'static str, Program), PlanError> {
    match_inner(instruction, None, image_size)
}

fn match_inner(
    instruction: &str,
    scene: Option<&SceneSummary>,
    image_size: (u32, u32),
) -> Result<(&'static str, Program), PlanError> {
    let text = normalize(instruction);
    if text.is_empty() {
        return Err(PlanError::NoTemplateMatch(instruction.to_string()));
    }

    if let Some(c) = SWAP_PAIR.captures(&text) {
        let class = singularize(&c[1]);
        let a = Selector::new(class.clone(), Positional::Left);
        let b = Selector::new(class, Positional::Right);
        return Ok(("swap-pair", swap_program(a, b)));
    }
    if let Some(c) = SWAP.captures(&text) {
        let a = selector(&c[1], scene)?;
        let b = selector(&c[2], scene)?;
        return Ok(("swap", swap_program(a, b)));
    }
    if let Some(c) = TRANSLATE.captures(&text) {
        let sel = selector(&c[1], scene)?;
        let source = sel.class_name.clone();
        let target = c[2].to_string();
        let edit = Statement::new("OBJ1", Op::Translate, vec![var("OBJ0"), Arg::Str(source), Arg::Str(target)]);
        return Ok(("translate", region_edit(sel, edit)));
    }
    if let Some(c) = MOVE.captures(&text) {
        let sel = selector(&c[1], scene)?;
        let dir: Direction = c[2].parse().expect("regex limits directions");
        let fraction = c.get(3).map_or(DEFAULT_MOVE_FRACTION, |m| m.as_str().parse::<f64>().unwrap() / 100.0);
        let extent = match dir {
            Direction::Left | Direction::Right => image_size.0,
            Direction::Up | Direction::Down => image_size.1,
        };
        let amount = round_half_up(extent as f64 * fraction).max(0) as f64;
        let edit = Statement::new(
            "OBJ1",
            Op::Move,
            vec![var("OBJ0"), Arg::Str(dir.as_str().into()), Arg::Number(amount)],
        );
        return Ok(("move", region_edit(sel, edit)));
    }
    if let Some(c) = SCALE.captures(&text) {
        let sel = selector(&c[2], scene)?;
        let given = c.get(3).map(|m| m.as_str().parse::<f64>().unwrap());
        let factor = match (&c[1], given) {
            ("enlarge", Some(f)) => f,
            ("enlarge", None) => DEFAULT_ENLARGE,
            (_, Some(f)) if f > 0.0 => 1.0 / f,
            _ => DEFAULT_SHRINK,
        };
        if !(factor.is_finite() && factor > 0.0) {
            return Err(PlanError::NoTemplateMatch(instruction.to_string()));
        }
        let edit = Statement::new("OBJ1", Op::Scale, vec![var("OBJ0"), Arg::Number(factor)]);
        return Ok(("scale", region_edit(sel, edit)));
    }
    if let Some(c) = REMOVE.captures(&text) {
        let sel = selector(&c[1], scene)?;
        return Ok((
            "remove",
            Program::from_statements(vec![
                segment("OBJ0", sel),
                Statement::new("OUT", Op::Inpaint, vec![image(), var("OBJ0")]),
            ]),
        ));
    }
    Err(PlanError::NoTemplateMatch(instruction.to_string()))
}

fn swap_program(a: Selector, b: Selector) -> Program {
    Program::from_statements(vec![
        segment("OBJ0", a),
        segment("OBJ1", b),
        Statement::new("OUT", Op::Swap, vec![image(), var("OBJ0"), var("OBJ1")]),
    ])
}
