use std::collections::HashMap;
use std::fmt::Write;

use thiserror::Error;

use super::{Condition, Edge, StateId, SubgoalAutomaton};
use crate::traces::Alphabet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

pub(super) fn to_text(a: &SubgoalAutomaton) -> String {
    let mut out = String::new();
    let names: Vec<String> = a.states().map(|u| a.state_name(u)).collect();
    writeln!(out, "states: {}", names.join(" ")).unwrap();
    writeln!(out, "alphabet: {}", a.alphabet()).unwrap();
    writeln!(out, "max_edges_per_pair: {}", a.max_edges_per_pair()).unwrap();
    for e in a.edges() {
        writeln!(
            out,
            "{} -> {} : {}",
            a.state_name(e.from),
            a.state_name(e.to),
            edge_label(a, e, " | ")
        )
        .unwrap();
    }
    out
}

fn edge_label(a: &SubgoalAutomaton, e: &Edge, sep: &str) -> String {
    e.disjuncts
        .iter()
        .map(|c| c.display(a.alphabet()).to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

pub(super) fn to_dot(a: &SubgoalAutomaton) -> String {
    let mut out = String::from("digraph automaton {\n  rankdir=LR;\n  node [shape=circle];\n");
    for u in a.states() {
        let name = a.state_name(u);
        let shape = if a.is_terminal(u) {
            "doublecircle"
        } else {
            "circle"
        };
        writeln!(out, "  {name} [shape={shape}];").unwrap();
    }
    writeln!(out, "  start [shape=point];\n  start -> u0;").unwrap();
    for e in a.edges() {
        let label = edge_label(a, e, " | ")
            .replace('!', "¬")
            .replace(" & ", " ∧ ")
            .replace(" | ", " ∨ ");
        writeln!(
            out,
            "  {} -> {} [label=\"{}\"];",
            a.state_name(e.from),
            a.state_name(e.to),
            label
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

struct Ctx<'a> {
    line_no: usize,
    line: &'a str,
}

impl<'a> Ctx<'a> {
    // `part` must be a subslice of `line`
    fn err(&self, part: &str, message: impl Into<String>) -> ParseError {
        let base = self.line.as_ptr() as usize;
        let p = part.as_ptr() as usize;
        let column = if p >= base && p <= base + self.line.len() {
            p - base + 1
        } else {
            1
        };
        ParseError {
            line: self.line_no,
            column,
            message: message.into(),
        }
    }
}

pub(super) fn parse(text: &str) -> Result<SubgoalAutomaton, ParseError> {
    let mut states: Option<(usize, HashMap<String, StateId>)> = None;
    let mut alphabet: Option<Alphabet> = None;
    let mut max_edges: Option<usize> = None;
    let mut edges: Vec<Edge> = Vec::new();
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let ctx = Ctx {
            line_no: i + 1,
            line: raw,
        };
        last_line = i + 1;
        let body = line.trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix("states:") {
            if states.is_some() {
                return Err(ctx.err(body, "`states` declared twice"));
            }
            states = Some(parse_states(&ctx, rest)?);
        } else if let Some(rest) = body.strip_prefix("alphabet:") {
            if alphabet.is_some() {
                return Err(ctx.err(body, "`alphabet` declared twice"));
            }
            let syms = rest
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty());
            alphabet = Some(Alphabet::new(syms).map_err(|e| ctx.err(rest, e.to_string()))?);
        } else if let Some(rest) = body.strip_prefix("max_edges_per_pair:") {
            let v = rest.trim();
            let k: usize = v
                .parse()
                .map_err(|_| ctx.err(v, format!("expected a positive integer, found `{v}`")))?;
            if k == 0 {
                return Err(ctx.err(v, "max_edges_per_pair must be positive"));
            }
            max_edges = Some(k);
        } else if body.contains("->") {
            let (_, names) = states
                .as_ref()
                .ok_or_else(|| ctx.err(body, "edge before `states` header"))?;
            let alpha = alphabet
                .as_ref()
                .ok_or_else(|| ctx.err(body, "edge before `alphabet` header"))?;
            edges.push(parse_edge(&ctx, body, names, alpha)?);
        } else {
            return Err(ctx.err(body, "expected a header or an edge `u -> v : condition`"));
        }
    }

    let eof = |message: &str| ParseError {
        line: last_line.max(1),
        column: 1,
        message: message.to_string(),
    };
    let (n, _) = states.ok_or_else(|| eof("missing `states` header"))?;
    let alphabet = alphabet.ok_or_else(|| eof("missing `alphabet` header"))?;
    let k = max_edges.unwrap_or_else(|| edges.iter().map(|e| e.disjuncts.len()).max().unwrap_or(1).max(1));
    SubgoalAutomaton::new(alphabet, n, k, edges).map_err(|e| eof(&e.to_string()))
}

fn parse_states(ctx: &Ctx, rest: &str) -> Result<(usize, HashMap<String, StateId>), ParseError> {
    let tokens: Vec<&str> = rest.split_whitespace().collect();
    let mut seen: HashMap<&str, ()> = HashMap::new();
    for t in &tokens {
        if seen.insert(t, ()).is_some() {
            return Err(ctx.err(t, format!("duplicate state `{t}`")));
        }
    }
    let n = tokens.len();
    if n < 3 {
        return Err(ctx.err(rest, format!("need at least 3 states, found {n}")));
    }
    for required in ["u0", "uA", "uR"] {
        if !seen.contains_key(required) {
            return Err(ctx.err(rest, format!("missing state `{required}`")));
        }
    }
    let mut map = HashMap::new();
    for t in &tokens {
        let id = match *t {
            "uA" => n - 2,
            "uR" => n - 1,
            other => {
                let idx = other
                    .strip_prefix('u')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&d| d + 2 < n)
                    .ok_or_else(|| {
                        ctx.err(t, format!("state `{other}` is not u0..u{} / uA / uR", n - 3))
                    })?;
                if format!("u{idx}") != other {
                    return Err(ctx.err(t, format!("malformed state name `{other}`")));
                }
                idx
            }
        };
        map.insert(t.to_string(), StateId(id as u8));
    }
    Ok((n, map))
}

fn parse_edge(
    ctx: &Ctx,
    body: &str,
    names: &HashMap<String, StateId>,
    alphabet: &Alphabet,
) -> Result<Edge, ParseError> {
    let (head, cond) = body
        .split_once(':')
        .ok_or_else(|| ctx.err(body, "missing `:` before the condition"))?;
    let (from, to) = head
        .split_once("->")
        .ok_or_else(|| ctx.err(head, "missing `->`"))?;
    let lookup = |s: &str| {
        let s = s.trim();
        names
            .get(s)
            .copied()
            .ok_or_else(|| ctx.err(s, format!("unknown state `{s}`")))
    };
    let from = lookup(from)?;
    let to = lookup(to)?;
    let mut disjuncts = Vec::new();
    for d in cond.split('|') {
        let d_trim = d.trim();
        if d_trim.is_empty() {
            return Err(ctx.err(d, "empty disjunct"));
        }
        let mut pos = crate::traces::ObservationSet::EMPTY;
        let mut neg = crate::traces::ObservationSet::EMPTY;
        for lit in d.split('&') {
            let lit = lit.trim();
            let (negated, sym) = match lit.strip_prefix('!') {
                Some(s) => (true, s.trim_start()),
                None => (false, lit),
            };
            if sym.is_empty() {
                return Err(ctx.err(lit, "empty literal"));
            }
            let id = alphabet
                .id(sym)
                .ok_or_else(|| ctx.err(sym, format!("unknown observable `{sym}`")))?;
            if negated {
                neg.insert(id);
            } else {
                pos.insert(id);
            }
        }
        let c = Condition::new(pos, neg).map_err(|e| ctx.err(d_trim, e.to_string()))?;
        disjuncts.push(c);
    }
    Ok(Edge {
        from,
        to,
        disjuncts,
    })
}
