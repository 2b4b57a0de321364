//! Line-oriented text format for systems.
//!
//! ```text
//! # comment
//! place p0 p1 p2 p3
//! trans t0 : in 2*p1 ; out p2 p3
//! trans t1 : in p2 ; out p3 ; inh p0
//! marking 4*p1 p0
//! ```
//!
//! Arc items are `w*pN` (or bare `pN` for weight 1), separated by spaces or
//! `+`. Every place used must be declared. `marking nil` (or no marking line)
//! is the empty marking.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::bag::{Bag, Multiplicity};
use crate::net::{ArcTriple, Net, PlaceBag, PlaceId, SystemState, TranId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Parsed contents of a net file, before normalization.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NetDocument {
    pub places: BTreeSet<PlaceId>,
    pub transitions: BTreeMap<TranId, ArcTriple>,
    pub marking: PlaceBag,
}

impl NetDocument {
    pub fn net(&self) -> Net {
        Net::from_entries(self.transitions.iter().map(|(&k, v)| (k, v.clone()))).expect("keys are unique")
    }

    /// The canonical system (normalized net).
    pub fn to_state(&self) -> SystemState {
        SystemState::new(self.net(), self.marking.clone())
    }

    pub fn from_state(state: &SystemState) -> Self {
        let mut places: BTreeSet<PlaceId> = state.net().places().into_iter().collect();
        places.extend(state.marking().support());
        NetDocument {
            places,
            transitions: state.net().iter().map(|(k, v)| (k, v.clone())).collect(),
            marking: state.marking().clone(),
        }
    }
}

pub fn parse_net(text: &str) -> Result<SystemState, ParseError> {
    parse_document(text).map(|d| d.to_state())
}

pub fn emit_net(state: &SystemState) -> String {
    emit_document(&NetDocument::from_state(state))
}

struct Cursor<'a> {
    line: usize,
    raw: &'a str,
}

impl Cursor<'_> {
    fn err(&self, at: &str, message: impl Into<String>) -> ParseError {
        // `at` is always a subslice of `raw`
        let column = at.as_ptr() as usize - self.raw.as_ptr() as usize + 1;
        ParseError {
            line: self.line,
            column,
            message: message.into(),
        }
    }
}

pub fn parse_document(text: &str) -> Result<NetDocument, ParseError> {
    let mut doc = NetDocument::default();
    let mut marking_seen = false;
    // (place, line cursor info) for the undeclared-place check after all lines
    let mut uses: Vec<(PlaceId, usize, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let cur = Cursor { line: idx + 1, raw };
        let content = raw.split('#').next().unwrap_or("");
        let body = content.trim_start();
        if body.trim().is_empty() {
            continue;
        }
        let (keyword, rest) = body.split_once(char::is_whitespace).unwrap_or((body.trim_end(), ""));
        match keyword {
            "place" => {
                for tok in tokens(rest) {
                    let pl: PlaceId = tok.parse().map_err(|_| cur.err(tok, format!("expected a place, found {tok:?}")))?;
                    doc.places.insert(pl);
                }
            }
            "trans" => {
                let (head, arcs) = rest
                    .split_once(':')
                    .ok_or_else(|| cur.err(rest, "expected `trans tN : ...`"))?;
                let head_tok = head.trim();
                let at = if head_tok.is_empty() { head } else { &head[head.find(head_tok).unwrap()..] };
                let tr: TranId = head_tok
                    .parse()
                    .map_err(|_| cur.err(at, format!("expected a transition, found {head_tok:?}")))?;
                if doc.transitions.contains_key(&tr) {
                    return Err(cur.err(at, format!("duplicate transition {tr}")));
                }
                let mut triple = ArcTriple::default();
                let mut seen = BTreeSet::new();
                for section in arcs.split(';') {
                    let trimmed = section.trim_start();
                    if trimmed.trim().is_empty() {
                        continue;
                    }
                    let (kind, items) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed.trim_end(), ""));
                    if !seen.insert(kind) {
                        return Err(cur.err(trimmed, format!("repeated `{kind}` section")));
                    }
                    let bag = parse_items(&cur, items, &mut uses)?;
                    match kind {
                        "in" => triple.input = bag,
                        "out" => triple.output = bag,
                        "inh" => triple.inhibitor = bag,
                        _ => return Err(cur.err(trimmed, format!("unknown arc section {kind:?}; expected in, out or inh"))),
                    }
                }
                doc.transitions.insert(tr, triple);
            }
            "marking" => {
                if marking_seen {
                    return Err(cur.err(body, "duplicate marking line"));
                }
                marking_seen = true;
                doc.marking = parse_items(&cur, rest, &mut uses)?;
            }
            other => return Err(cur.err(body, format!("unknown directive {other:?}"))),
        }
    }
    if let Some(&(pl, line, column)) = uses.iter().find(|(pl, _, _)| !doc.places.contains(pl)) {
        return Err(ParseError {
            line,
            column,
            message: format!("undeclared place {pl}"),
        });
    }
    Ok(doc)
}

fn tokens(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| c.is_whitespace() || c == '+').filter(|t| !t.is_empty())
}

fn parse_items(cur: &Cursor<'_>, items: &str, uses: &mut Vec<(PlaceId, usize, usize)>) -> Result<PlaceBag, ParseError> {
    let mut pairs: Vec<(PlaceId, Multiplicity)> = Vec::new();
    let toks: Vec<&str> = tokens(items).collect();
    if toks == ["nil"] {
        return Ok(PlaceBag::nil());
    }
    for tok in toks {
        let (w, name) = match tok.split_once('*') {
            Some((w, name)) => {
                let w: Multiplicity = w.parse().map_err(|_| cur.err(tok, format!("bad weight {w:?}")))?;
                (w, name)
            }
            None => (1, tok),
        };
        let pl: PlaceId = name.parse().map_err(|_| cur.err(tok, format!("expected a place, found {name:?}")))?;
        let column = cur.err(tok, "").column;
        uses.push((pl, cur.line, column));
        pairs.push((pl, w));
    }
    Bag::from_pairs(pairs).map_err(|e| cur.err(items.trim_start(), e.to_string()))
}

fn write_items(out: &mut String, bag: &PlaceBag) {
    for (i, (pl, k)) in bag.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{k}*{pl}");
    }
}

pub fn emit_document(doc: &NetDocument) -> String {
    let mut out = String::new();
    if !doc.places.is_empty() {
        out.push_str("place");
        for pl in &doc.places {
            let _ = write!(out, " {pl}");
        }
        out.push('\n');
    }
    for (tr, q) in &doc.transitions {
        let _ = write!(out, "trans {tr} :");
        let mut sections = Vec::new();
        for (kw, bag) in [("in", &q.input), ("out", &q.output), ("inh", &q.inhibitor)] {
            if !bag.is_empty() {
                let mut s = format!(" {kw} ");
                write_items(&mut s, bag);
                sections.push(s);
            }
        }
        out.push_str(&sections.join(" ;"));
        out.push('\n');
    }
    out.push_str("marking ");
    if doc.marking.is_empty() {
        out.push_str("nil");
    } else {
        write_items(&mut out, &doc.marking);
    }
    out.push('\n');
    out
}
