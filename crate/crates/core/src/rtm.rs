//! Classical reactive Turing machines: rules, head-marked tapes, stepping and
//! configuration graphs.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::atoms::{parse_term, Atom, AtomTerm, Nominal};
use crate::lts::{explore, Exploration};
use crate::syntax::{content_lines, is_symbol_char, Cursor, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Move {
    L,
    R,
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Move::L => "L",
            Move::R => "R",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RtmError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("line {line}: unknown move symbol `{symbol}`")]
    UnknownMove { line: usize, symbol: String },
    #[error("no initial state declared")]
    MissingInitial,
    #[error("oracle failure: {0}")]
    Oracle(String),
}

/// A tape instance: finitely many non-blank cells and one marked head cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tape {
    pub cells: Vec<AtomTerm>,
    pub head: usize,
}

impl Tape {
    /// The all-blank tape.
    pub fn blank() -> Tape {
        Tape { cells: vec![AtomTerm::blank()], head: 0 }
    }

    /// A tape holding `cells` with the head on `head`, normalized.
    pub fn new(cells: Vec<AtomTerm>, head: usize) -> Tape {
        assert!(head < cells.len(), "head outside the tape");
        Tape { cells, head }.normalized()
    }

    pub fn read(&self) -> &AtomTerm {
        &self.cells[self.head]
    }

    /// Strips unmarked blanks at either end.
    pub fn normalized(mut self) -> Tape {
        while self.cells.len() > self.head + 1 && self.cells.last().is_some_and(AtomTerm::is_blank) {
            self.cells.pop();
        }
        let lead = self.cells[..self.head].iter().take_while(|c| c.is_blank()).count();
        self.cells.drain(..lead);
        self.head -= lead;
        self
    }

    /// Writes at the head and moves, extending with a blank at the edge.
    /// The result is not normalized.
    pub fn write_move(&self, write: &AtomTerm, mv: Move) -> Tape {
        let mut cells = self.cells.clone();
        cells[self.head] = write.clone();
        let head = match mv {
            Move::L if self.head == 0 => {
                cells.insert(0, AtomTerm::blank());
                0
            }
            Move::L => self.head - 1,
            Move::R => {
                if self.head + 1 == cells.len() {
                    cells.push(AtomTerm::blank());
                }
                self.head + 1
            }
        };
        Tape { cells, head }
    }
}

impl fmt::Display for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.cells.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if i == self.head {
                write!(f, "[{c}]")?;
            } else {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

/// A control state paired with a tape instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    pub state: AtomTerm,
    pub tape: Tape,
}

impl Configuration {
    pub fn initial(state: AtomTerm) -> Configuration {
        Configuration { state, tape: Tape::blank() }
    }

    /// `('cfg, state, (left cells), head cell, (right cells))`.
    pub fn to_term(&self) -> AtomTerm {
        let cells = &self.tape.cells;
        AtomTerm::Tuple(vec![
            AtomTerm::constant("cfg"),
            self.state.clone(),
            AtomTerm::Tuple(cells[..self.tape.head].to_vec()),
            cells[self.tape.head].clone(),
            AtomTerm::Tuple(cells[self.tape.head + 1..].to_vec()),
        ])
    }

    pub fn from_term(t: &AtomTerm) -> Option<Configuration> {
        let AtomTerm::Tuple(parts) = t else { return None };
        let [tag, state, AtomTerm::Tuple(left), head, AtomTerm::Tuple(right)] = parts.as_slice() else {
            return None;
        };
        if *tag != AtomTerm::constant("cfg") {
            return None;
        }
        let mut cells = left.clone();
        cells.push(head.clone());
        cells.extend(right.iter().cloned());
        Some(Configuration { state: state.clone(), tape: Tape { cells, head: left.len() } })
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.state, self.tape)
    }
}

impl Nominal for Tape {
    fn visit_atoms(&self, f: &mut dyn FnMut(Atom)) {
        self.cells.visit_atoms(f)
    }
    fn rename_atoms(&self, f: &mut dyn FnMut(Atom) -> Atom) -> Self {
        Tape { cells: self.cells.rename_atoms(f), head: self.head }
    }
}

impl Nominal for Configuration {
    fn visit_atoms(&self, f: &mut dyn FnMut(Atom)) {
        self.state.visit_atoms(f);
        self.tape.visit_atoms(f);
    }
    fn rename_atoms(&self, f: &mut dyn FnMut(Atom) -> Atom) -> Self {
        Configuration { state: self.state.rename_atoms(f), tape: self.tape.rename_atoms(f) }
    }
}

/// `source →action[read/write]mv target`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RtmRule {
    pub source: AtomTerm,
    pub read: AtomTerm,
    pub action: AtomTerm,
    pub write: AtomTerm,
    pub mv: Move,
    pub target: AtomTerm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rtm {
    pub rules: Vec<RtmRule>,
    pub initial: AtomTerm,
}

impl Rtm {
    /// The initial state and every rule endpoint.
    pub fn states(&self) -> BTreeSet<AtomTerm> {
        let mut out = BTreeSet::from([self.initial.clone()]);
        for r in &self.rules {
            out.insert(r.source.clone());
            out.insert(r.target.clone());
        }
        out
    }

    /// Data symbols read or written by some rule, blank included.
    pub fn data_alphabet(&self) -> BTreeSet<AtomTerm> {
        let mut out = BTreeSet::from([AtomTerm::blank()]);
        for r in &self.rules {
            out.insert(r.read.clone());
            out.insert(r.write.clone());
        }
        out
    }

    pub fn action_alphabet(&self) -> BTreeSet<AtomTerm> {
        self.rules.iter().map(|r| r.action.clone()).collect()
    }

    pub fn initial_configuration(&self) -> Configuration {
        Configuration::initial(self.initial.clone())
    }
}

/// Successors of `c` without tape normalization, one per applicable rule.
pub fn step_unnormalized(m: &Rtm, c: &Configuration) -> Vec<(AtomTerm, Configuration)> {
    let mut out = Vec::new();
    for r in &m.rules {
        if r.source == c.state && &r.read == c.tape.read() {
            let next = Configuration { state: r.target.clone(), tape: c.tape.write_move(&r.write, r.mv) };
            if !out.iter().any(|(a, n)| a == &r.action && n == &next) {
                out.push((r.action.clone(), next));
            }
        }
    }
    out
}

/// Successors of `c`; an empty result is a deadlock.
pub fn step(m: &Rtm, c: &Configuration) -> Vec<(AtomTerm, Configuration)> {
    let mut out: Vec<(AtomTerm, Configuration)> = Vec::new();
    for (a, n) in step_unnormalized(m, c) {
        let n = Configuration { state: n.state, tape: n.tape.normalized() };
        if !out.contains(&(a.clone(), n.clone())) {
            out.push((a, n));
        }
    }
    out
}

/// Breadth-first configuration graph from `(initial, [□])`.
pub fn config_lts(m: &Rtm, depth: usize) -> Exploration {
    let run = explore(m.initial_configuration(), depth, |c| c.to_term().to_string(), |c| {
        Ok::<_, std::convert::Infallible>((step(m, c), false))
    });
    match run {
        Ok(e) => e,
        Err(never) => match never {},
    }
}

/// Parses a state or action: a bare identifier is a constant, anything else a term.
pub(crate) fn parse_item(cur: &mut Cursor<'_>) -> Result<AtomTerm, ParseError> {
    cur.skip_ws();
    match cur.peek() {
        Some('\'' | '#' | '(') => parse_term(cur),
        Some(c) if is_symbol_char(c) => Ok(AtomTerm::Const(cur.take_while(is_symbol_char))),
        _ => Err(cur.error("expected a state, symbol or action")),
    }
}

/// A constant prints bare; everything else in term syntax.
pub(crate) fn item_text(t: &AtomTerm) -> String {
    match t {
        AtomTerm::Const(s) if !t.is_tau() => s.clone(),
        other => other.to_string(),
    }
}

pub(crate) fn parse_move(cur: &mut Cursor<'_>, line: usize) -> Result<Move, RtmError> {
    cur.skip_ws();
    let tok = cur.take_while(|c| !c.is_whitespace());
    match tok.as_str() {
        "L" => Ok(Move::L),
        "R" => Ok(Move::R),
        _ => Err(RtmError::UnknownMove { line, symbol: tok }),
    }
}

/// Parses the `.rtm` format: `initial: <state>` and `rule: s d a e L|R t` lines.
pub fn parse_rtm(text: &str) -> Result<Rtm, RtmError> {
    let mut initial = None;
    let mut rules = Vec::new();
    for (n, line) in content_lines(text) {
        if let Some(rest) = line.strip_prefix("initial:") {
            let mut cur = Cursor::new(rest);
            let s = parse_item(&mut cur).map_err(|e| e.on_line(n))?;
            cur.expect_end().map_err(|e| e.on_line(n))?;
            initial = Some(s);
        } else if let Some(rest) = line.strip_prefix("rule:") {
            let mut cur = Cursor::new(rest);
            let item = |cur: &mut Cursor<'_>| parse_item(cur).map_err(|e| e.on_line(n));
            let source = item(&mut cur)?;
            let read = item(&mut cur)?;
            let action = item(&mut cur)?;
            let write = item(&mut cur)?;
            let mv = parse_move(&mut cur, n)?;
            let target = item(&mut cur)?;
            cur.expect_end().map_err(|e| e.on_line(n))?;
            rules.push(RtmRule { source, read, action, write, mv, target });
        } else {
            return Err(ParseError::new(n, 1, format!("unrecognised line `{line}`")).into());
        }
    }
    Ok(Rtm { rules, initial: initial.ok_or(RtmError::MissingInitial)? })
}

pub fn emit_rtm(m: &Rtm) -> String {
    let mut out = format!("initial: {}\n", item_text(&m.initial));
    for r in &m.rules {
        out.push_str(&format!(
            "rule: {} {} {} {} {} {}\n",
            item_text(&r.source),
            r.read,
            item_text(&r.action),
            r.write,
            r.mv,
            item_text(&r.target)
        ));
    }
    out
}
