//! Line-oriented market description files.
//!
//! ```text
//! # comment
//! type o1 capacity 1
//! type o2 capacity 1
//! type none capacity 3 null
//! agent a1 prefers o1 > none > o2
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;

use rankmin_core::{Market, PreferenceOrder, Profile, TypeSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Code {
    UnknownDirective,
    MalformedType,
    BadCapacity,
    DuplicateType,
    MissingNull,
    MultipleNull,
    NullCapacityTooSmall,
    CapacityOutOfRange,
    MalformedAgent,
    DuplicateAgent,
    UnknownType,
    RepeatedType,
    PartialRanking,
    TooFewAgents,
    TooFewTypes,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::UnknownDirective => "E001",
            Code::MalformedType => "E002",
            Code::BadCapacity => "E003",
            Code::DuplicateType => "E004",
            Code::MissingNull => "E005",
            Code::MultipleNull => "E006",
            Code::NullCapacityTooSmall => "E007",
            Code::CapacityOutOfRange => "E008",
            Code::MalformedAgent => "E009",
            Code::DuplicateAgent => "E010",
            Code::UnknownType => "E011",
            Code::RepeatedType => "E012",
            Code::PartialRanking => "E013",
            Code::TooFewAgents => "E014",
            Code::TooFewTypes => "E015",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("error[{}] at {line}:{column}: {message}", code.as_str())]
pub struct SpecError {
    pub code: Code,
    /// 1-based; 0 when the problem concerns the file as a whole.
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn err(code: Code, line: usize, column: usize, message: impl Into<String>) -> SpecError {
    SpecError {
        code,
        line,
        column,
        message: message.into(),
    }
}

/// A whitespace-separated token and its 1-based column.
#[derive(Clone, Copy, Debug)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token {
                    text: &line[s..i],
                    column: line[..s].chars().count() + 1,
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    out
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.contains(['>', '#'])
}

struct TypeDecl {
    name: String,
    capacity: u32,
    null: bool,
    line: usize,
    column: usize,
    capacity_column: usize,
}

struct AgentDecl {
    name: String,
    ranking: Vec<(String, usize)>,
    line: usize,
    column: usize,
}

fn parse_type(toks: &[Token<'_>], line: usize) -> Result<TypeDecl, SpecError> {
    let shape_ok = matches!(toks.len(), 4 | 5)
        && toks[2].text == "capacity"
        && (toks.len() == 4 || toks[4].text == "null")
        && valid_name(toks[1].text);
    if !shape_ok {
        let column = toks.get(1).map_or(toks[0].column, |t| t.column);
        return Err(err(
            Code::MalformedType,
            line,
            column,
            "expected `type <name> capacity <int> [null]`",
        ));
    }
    let capacity = toks[3].text.parse::<u32>().map_err(|_| {
        err(
            Code::BadCapacity,
            line,
            toks[3].column,
            format!("capacity `{}` is not a non-negative integer", toks[3].text),
        )
    })?;
    Ok(TypeDecl {
        name: toks[1].text.to_string(),
        capacity,
        null: toks.len() == 5,
        line,
        column: toks[1].column,
        capacity_column: toks[3].column,
    })
}

fn parse_agent(raw: &str, toks: &[Token<'_>], line: usize) -> Result<AgentDecl, SpecError> {
    if toks.len() < 3 || toks[2].text != "prefers" || !valid_name(toks[1].text) {
        let column = toks.get(1).map_or(toks[0].column, |t| t.column);
        return Err(err(
            Code::MalformedAgent,
            line,
            column,
            "expected `agent <name> prefers <type> > <type> > ...`",
        ));
    }
    // byte offset just past `prefers`
    let offset = raw
        .char_indices()
        .nth(toks[2].column - 1)
        .map(|(i, _)| i)
        .unwrap_or(raw.len())
        + "prefers".len();
    let rest = &raw[offset..];
    let mut ranking = Vec::new();
    let mut at = offset;
    for piece in rest.split('>') {
        let trimmed = piece.trim();
        let lead = piece.len() - piece.trim_start().len();
        let column = raw[..at + lead].chars().count() + 1;
        if trimmed.is_empty() || trimmed.contains(char::is_whitespace) {
            return Err(err(
                Code::MalformedAgent,
                line,
                column,
                "ranking entries must be single type names separated by `>`",
            ));
        }
        ranking.push((trimmed.to_string(), column));
        at += piece.len() + 1;
    }
    Ok(AgentDecl {
        name: toks[1].text.to_string(),
        ranking,
        line,
        column: toks[1].column,
    })
}

/// Parses and validates a market description together with every agent's
/// ranking.
pub fn parse_market_spec(text: &str) -> Result<(Market, Profile), SpecError> {
    let mut types: Vec<TypeDecl> = Vec::new();
    let mut agents: Vec<AgentDecl> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks = tokens(content);
        let Some(head) = toks.first() else { continue };
        match head.text {
            "type" => {
                let decl = parse_type(&toks, line)?;
                if types.iter().any(|t| t.name == decl.name) {
                    return Err(err(
                        Code::DuplicateType,
                        line,
                        decl.column,
                        format!("type `{}` is declared twice", decl.name),
                    ));
                }
                if decl.null && types.iter().any(|t| t.null) {
                    return Err(err(
                        Code::MultipleNull,
                        line,
                        decl.column,
                        "only one type may be marked null",
                    ));
                }
                types.push(decl);
            }
            "agent" => {
                let decl = parse_agent(content, &toks, line)?;
                if agents.iter().any(|a| a.name == decl.name) {
                    return Err(err(
                        Code::DuplicateAgent,
                        line,
                        decl.column,
                        format!("agent `{}` is declared twice", decl.name),
                    ));
                }
                agents.push(decl);
            }
            other => {
                return Err(err(
                    Code::UnknownDirective,
                    line,
                    head.column,
                    format!("unknown directive `{other}` (expected `type` or `agent`)"),
                ))
            }
        }
    }

    if types.len() < 3 {
        return Err(err(
            Code::TooFewTypes,
            0,
            0,
            format!("at least three types are required, found {}", types.len()),
        ));
    }
    let Some(null) = types.iter().find(|t| t.null) else {
        return Err(err(Code::MissingNull, 0, 0, "no type is marked null"));
    };
    let index: HashMap<&str, usize> = types
        .iter()
        .enumerate()
        .map(|(i, t)| (t.name.as_str(), i))
        .collect();
    let mut orders = Vec::with_capacity(agents.len());
    for agent in &agents {
        let mut seen = HashSet::new();
        let mut ranking = Vec::with_capacity(types.len());
        for (name, column) in &agent.ranking {
            let &i = index.get(name.as_str()).ok_or_else(|| {
                err(
                    Code::UnknownType,
                    agent.line,
                    *column,
                    format!("unknown type `{name}`"),
                )
            })?;
            if !seen.insert(i) {
                return Err(err(
                    Code::RepeatedType,
                    agent.line,
                    *column,
                    format!("type `{name}` appears twice in the ranking"),
                ));
            }
            ranking.push(rankmin_core::TypeId(i));
        }
        if ranking.len() != types.len() {
            let missing: Vec<&str> = types
                .iter()
                .enumerate()
                .filter(|(i, _)| !seen.contains(i))
                .map(|(_, t)| t.name.as_str())
                .collect();
            return Err(err(
                Code::PartialRanking,
                agent.line,
                agent.column,
                format!("ranking of `{}` omits {}", agent.name, missing.join(", ")),
            ));
        }
        orders.push(PreferenceOrder::new(ranking, types.len()).expect("checked permutation"));
    }

    if agents.len() < 2 {
        return Err(err(
            Code::TooFewAgents,
            0,
            0,
            format!("at least two agents are required, found {}", agents.len()),
        ));
    }
    let n = agents.len() as u32;
    if null.capacity < n {
        return Err(err(
            Code::NullCapacityTooSmall,
            null.line,
            null.capacity_column,
            format!("null capacity {} is below the agent count {n}", null.capacity),
        ));
    }
    if let Some(t) = types.iter().find(|t| !t.null && !(1..n).contains(&t.capacity)) {
        return Err(err(
            Code::CapacityOutOfRange,
            t.line,
            t.capacity_column,
            format!("capacity of `{}` must lie in 1..{}", t.name, n - 1),
        ));
    }

    let specs = types
        .iter()
        .map(|t| {
            if t.null {
                TypeSpec::null(t.name.clone(), t.capacity)
            } else {
                TypeSpec::new(t.name.clone(), t.capacity)
            }
        })
        .collect();
    let market = Market::new(agents.iter().map(|a| a.name.clone()).collect(), specs)
        .expect("validated above");
    let profile = Profile::new(&market, orders).expect("validated above");
    Ok((market, profile))
}

/// Writes the canonical text form of a market and profile.
pub fn render_market_spec(market: &Market, profile: &Profile) -> String {
    let mut out = String::new();
    for t in market.type_specs() {
        out.push_str(&format!("type {} capacity {}", t.name, t.capacity));
        if t.is_null {
            out.push_str(" null");
        }
        out.push('\n');
    }
    for a in market.agents() {
        out.push_str(&format!(
            "agent {} prefers {}\n",
            market.agent_name(a),
            render_order(market, profile.order(a))
        ));
    }
    out
}

pub fn render_order(market: &Market, order: &PreferenceOrder) -> String {
    order
        .ranking()
        .iter()
        .map(|&o| market.type_name(o))
        .collect::<Vec<_>>()
        .join(" > ")
}

/// Parses `o1 > o2 > none` (spaces optional) against the market's types.
pub fn parse_order(market: &Market, text: &str) -> Result<PreferenceOrder, String> {
    let names: Vec<&str> = text.split('>').map(str::trim).collect();
    market.order(&names).map_err(|e| format!("invalid order `{text}`: {e}"))
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
