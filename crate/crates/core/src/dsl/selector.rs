use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Positional {
    Left,
    Right,
    Middle,
    FarLeft,
    FarRight,
    Index(usize),
    All,
}

/// Class name plus positional constraint, e.g. "far right pigeon".
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Selector {
    pub class_name: String,
    pub positional: Positional,
    pub attributes: Vec<String>,
}

impl Selector {
    pub fn new(class_name: impl Into<String>, positional: Positional) -> Self {
        Self { class_name: class_name.into(), positional, attributes: Vec::new() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectorError {
    #[error("empty selector")]
    EmptySelector,
}

const STOP_WORDS: [&str; 7] = ["the", "a", "an", "on", "at", "in", "of"];

/// Canonical form: `[positional] [attributes..] class`, positional omitted
/// when it is `all`.
impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut words: Vec<String> = Vec::new();
        match self.positional {
            Positional::All => {}
            Positional::Left => words.push("left".into()),
            Positional::Right => words.push("right".into()),
            Positional::Middle => words.push("middle".into()),
            Positional::FarLeft => words.push("far-left".into()),
            Positional::FarRight => words.push("far-right".into()),
            Positional::Index(k) => words.push(format!("#{k}")),
        }
        words.extend(self.attributes.iter().cloned());
        words.push(self.class_name.clone());
        f.write_str(&words.join(" "))
    }
}

fn single_keyword(tok: &str) -> Option<Positional> {
    match tok {
        "left" => Some(Positional::Left),
        "right" => Some(Positional::Right),
        "middle" => Some(Positional::Middle),
        "all" => Some(Positional::All),
        "far-left" => Some(Positional::FarLeft),
        "far-right" => Some(Positional::FarRight),
        _ => tok.strip_prefix('#').and_then(|k| k.parse::<usize>().ok()).map(Positional::Index),
    }
}

enum Token {
    Keyword(Positional, String),
    Stop(String),
    Word(String),
}

fn tokenize(text: &str) -> Vec<Token> {
    let raw: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let tok = &raw[i];
        if tok == "far" {
            if let Some(next) = raw.get(i + 1) {
                let pos = match next.as_str() {
                    "left" => Some(Positional::FarLeft),
                    "right" => Some(Positional::FarRight),
                    _ => None,
                };
                if let Some(pos) = pos {
                    out.push(Token::Keyword(pos, format!("far {next}")));
                    i += 2;
                    continue;
                }
            }
        }
        if let Some(pos) = single_keyword(tok) {
            out.push(Token::Keyword(pos, tok.clone()));
        } else if STOP_WORDS.contains(&tok.as_str()) {
            out.push(Token::Stop(tok.clone()));
        } else {
            out.push(Token::Word(tok.clone()));
        }
        i += 1;
    }
    out
}

/// Parse a selector phrase. Words are lower-cased; the class is the last
/// content word; the first positional keyword wins and any later ones are
/// kept as attributes. Phrases with no content word fall back to treating
/// the last raw word as the class.
pub fn parse_selector(text: &str) -> Result<Selector, SelectorError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(SelectorError::EmptySelector);
    }
    let last_word = tokens.iter().rposition(|t| matches!(t, Token::Word(_)));
    let Some(class_idx) = last_word else {
        // No content word: keep every raw word, last one is the class.
        let mut words: Vec<String> = tokens
            .into_iter()
            .flat_map(|t| match t {
                Token::Keyword(_, raw) | Token::Stop(raw) | Token::Word(raw) => {
                    raw.split(' ').map(str::to_string).collect::<Vec<_>>()
                }
            })
            .collect();
        let class_name = words.pop().expect("non-empty");
        return Ok(Selector { class_name, positional: Positional::All, attributes: words });
    };

    let mut positional = None;
    let mut attributes = Vec::new();
    let mut class_name = String::new();
    for (i, tok) in tokens.into_iter().enumerate() {
        match tok {
            Token::Word(w) if i == class_idx => class_name = w,
            Token::Word(w) => attributes.push(w),
            Token::Stop(_) => {}
            Token::Keyword(pos, raw) => {
                if positional.is_none() {
                    positional = Some(pos);
                } else {
                    attributes.push(raw.replace(' ', "-"));
                }
            }
        }
    }
    Ok(Selector { class_name, positional: positional.unwrap_or(Positional::All), attributes })
}
