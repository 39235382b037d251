//! Machines with atoms: rule schemas over orbit-finite alphabets, canonical
//! stepping, the tuple-manipulating gadgets, and oracle-backed infinitary
//! machines.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::atoms::{canonicalize, parse_term, support_of, AtomSet, AtomTerm, TermBounds};
use crate::lts::{explore, render_atoms, EffectiveLtsA, Exploration, LtsError};
use crate::orbitsets::{
    canonical_valuations, encode, parse_literals, parse_pattern, Binding, EqConstraint, OrbitDescriptor, OrbitSet,
    Pattern,
};
use crate::rtm::{parse_move, Configuration, Move, Rtm, RtmError};
use crate::syntax::{content_lines, Cursor, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RtmaError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Rtm(#[from] RtmError),
    #[error("no initial state declared")]
    MissingInitial,
}

/// `source →action[read/write]mv target` for every valuation satisfying the constraint.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleSchema {
    pub source: Pattern,
    pub read: Pattern,
    pub action: Pattern,
    pub write: Pattern,
    pub mv: Move,
    pub target: Pattern,
    pub constraint: EqConstraint,
}

impl RuleSchema {
    pub fn new(source: &str, read: &str, action: &str, write: &str, mv: Move, target: &str) -> RuleSchema {
        let p = |s: &str| s.parse::<Pattern>().unwrap_or_else(|e| panic!("bad pattern `{s}`: {e}"));
        RuleSchema {
            source: p(source),
            read: p(read),
            action: p(action),
            write: p(write),
            mv,
            target: p(target),
            constraint: EqConstraint::default(),
        }
    }

    pub fn with_constraint(mut self, lits: &str) -> RuleSchema {
        let mut cur = Cursor::new(lits);
        self.constraint = EqConstraint::new(parse_literals(&mut cur).expect("bad literals"));
        self
    }

    fn patterns(&self) -> [&Pattern; 5] {
        [&self.source, &self.read, &self.action, &self.write, &self.target]
    }

    /// Variables bound by the trigger `(source, read)`.
    pub fn trigger_vars(&self) -> Vec<String> {
        let mut vs = self.source.vars();
        for v in self.read.vars() {
            if !vs.contains(&v) {
                vs.push(v);
            }
        }
        vs
    }

    /// Variables first occurring in the action, write or target: a free choice of atom.
    pub fn right_only_vars(&self) -> Vec<String> {
        let bound = self.trigger_vars();
        let mut out: Vec<String> = Vec::new();
        for v in self.action.vars().into_iter().chain(self.write.vars()).chain(self.target.vars()) {
            if !bound.contains(&v) && !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    pub fn atoms(&self) -> AtomSet {
        let mut out: AtomSet = self.patterns().iter().flat_map(|p| p.atoms()).collect();
        out.extend(self.constraint.atoms());
        out
    }
}

impl fmt::Display for RuleSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {} {} {}", self.source, self.read, self.action, self.write, self.mv, self.target)?;
        if !self.constraint.is_empty() {
            write!(f, " where {}", self.constraint)?;
        }
        Ok(())
    }
}

/// A machine with atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtmA {
    pub support: AtomSet,
    pub schemas: Vec<RuleSchema>,
    pub initial: AtomTerm,
}

impl RtmA {
    /// The states named by the initial state and by schema endpoints.
    pub fn state_space(&self) -> OrbitSet {
        let mut ds = vec![OrbitDescriptor::unconstrained(Pattern::from_term(&self.initial))];
        for s in &self.schemas {
            for p in [&s.source, &s.target] {
                let d = OrbitDescriptor::new(p.clone(), s.constraint.clone());
                if !ds.contains(&d) {
                    ds.push(d);
                }
            }
        }
        OrbitSet::new(self.support.clone(), ds)
    }
}

/// Verdict of [`validate_rtma`]: problems name the offending schema by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtmaVerdict {
    pub accepted: bool,
    pub problems: Vec<String>,
}

/// Legality (constants within the support) and orbit-finiteness (bounded shapes).
pub fn validate_rtma(m: &RtmA) -> RtmaVerdict {
    let bounds = TermBounds::default();
    let mut problems = Vec::new();
    let stray: AtomSet = support_of(&m.initial).difference(&m.support).copied().collect();
    if !stray.is_empty() {
        problems.push(format!("initial state uses atoms outside the support: {}", render_atoms(&stray)));
    }
    for (i, s) in m.schemas.iter().enumerate() {
        let stray: AtomSet = s.atoms().difference(&m.support).copied().collect();
        if !stray.is_empty() {
            problems.push(format!("schema {i} (`{s}`) uses atoms outside the support: {}", render_atoms(&stray)));
        }
        for p in s.patterns() {
            if let Err(e) = p.check_bounds(&bounds) {
                problems.push(format!("schema {i} (`{s}`): {e}"));
            }
        }
    }
    RtmaVerdict { accepted: problems.is_empty(), problems }
}

/// Successors of `c`, one per schema, trigger binding and canonical choice of
/// the right-only variables: atoms of the support or of `c`, or atoms fresh
/// for both, introduced least-first.
pub fn step_canonical(m: &RtmA, c: &Configuration) -> Vec<(AtomTerm, Configuration)> {
    let mut protected = m.support.clone();
    protected.extend(support_of(c));
    let mut out: Vec<(AtomTerm, Configuration)> = Vec::new();
    for s in &m.schemas {
        let mut b = Binding::new();
        if !s.source.match_term(&c.state, &mut b) || !s.read.match_term(c.tape.read(), &mut b) {
            continue;
        }
        for val in canonical_valuations(&s.right_only_vars(), &b, &protected, &s.constraint) {
            let (Ok(a), Ok(w), Ok(t)) = (s.action.instantiate(&val), s.write.instantiate(&val), s.target.instantiate(&val))
            else {
                continue;
            };
            let next = Configuration { state: t, tape: c.tape.write_move(&w, s.mv).normalized() };
            if !out.contains(&(a.clone(), next.clone())) {
                out.push((a, next));
            }
        }
    }
    out
}

/// Anything stepping canonically over configurations with atoms.
pub trait AtomMachine: Send + Sync {
    fn support(&self) -> &AtomSet;
    fn initial_configuration(&self) -> Configuration;
    fn step(&self, c: &Configuration) -> Vec<(AtomTerm, Configuration)>;
}

impl AtomMachine for RtmA {
    fn support(&self) -> &AtomSet {
        &self.support
    }
    fn initial_configuration(&self) -> Configuration {
        Configuration::initial(self.initial.clone())
    }
    fn step(&self, c: &Configuration) -> Vec<(AtomTerm, Configuration)> {
        step_canonical(self, c)
    }
}

/// Breadth-first configuration graph from `start`, configurations in
/// canonical form over the machine support.
pub fn explore_from<M: AtomMachine + ?Sized>(m: &M, start: &Configuration, depth: usize) -> Exploration {
    let k = m.support().clone();
    let init = canonicalize(start, &k).0;
    let run = explore(init, depth, |c| c.to_term().to_string(), |c| {
        let succ = m.step(c).into_iter().map(|(a, n)| (a, canonicalize(&n, &k).0)).collect();
        Ok::<_, std::convert::Infallible>((succ, false))
    });
    match run {
        Ok(e) => e,
        Err(never) => match never {},
    }
}

pub fn config_lts_canonical<M: AtomMachine + ?Sized>(m: &M, depth: usize) -> Exploration {
    explore_from(m, &m.initial_configuration(), depth)
}

/// The effective system whose states are configuration terms and whose `out`
/// abstracts canonical steps of the representative configuration.
pub fn extract_effective_ltsa<M: AtomMachine + 'static>(m: Arc<M>) -> EffectiveLtsA {
    let init = m.initial_configuration().to_term();
    let support = m.support().clone();
    EffectiveLtsA::from_successors(support, &init, move |r| {
        let c = Configuration::from_term(r).ok_or_else(|| LtsError::Enumerator(format!("{r} is not a configuration")))?;
        Ok(m.step(&c).into_iter().map(|(a, n)| (a, n.to_term())).collect())
    })
}

fn parse_support(rest: &str, line: usize) -> Result<AtomSet, ParseError> {
    let mut out = AtomSet::new();
    for tok in rest.split_whitespace() {
        match tok.parse::<AtomTerm>() {
            Ok(AtomTerm::Atom(a)) => {
                out.insert(a);
            }
            _ => return Err(ParseError::new(line, 1, format!("expected an atom, found `{tok}`"))),
        }
    }
    Ok(out)
}

fn parse_schema(rest: &str, line: usize) -> Result<RuleSchema, RtmaError> {
    let bounds = TermBounds::default();
    let mut cur = Cursor::new(rest);
    let pat = |cur: &mut Cursor<'_>| -> Result<Pattern, ParseError> {
        cur.skip_ws();
        let col = cur.pos() + 1;
        let p = parse_pattern(cur).map_err(|e| e.on_line(line))?;
        p.check_bounds(&bounds).map_err(|e| ParseError::new(line, col, e.to_string()))?;
        Ok(p)
    };
    let source = pat(&mut cur)?;
    let read = pat(&mut cur)?;
    let action = pat(&mut cur)?;
    let write = pat(&mut cur)?;
    let mv = parse_move(&mut cur, line)?;
    let target = pat(&mut cur)?;
    let constraint = if cur.eat_str("where") {
        EqConstraint::new(parse_literals(&mut cur).map_err(|e| e.on_line(line))?)
    } else {
        EqConstraint::default()
    };
    cur.expect_end().map_err(|e| e.on_line(line))?;
    Ok(RuleSchema { source, read, action, write, mv, target, constraint })
}

/// Parses `.rtma`: `support:`, `initial:` and `schema:` lines, `#` comments.
pub fn parse_rtma(text: &str) -> Result<RtmA, RtmaError> {
    let mut support = AtomSet::new();
    let mut initial = None;
    let mut schemas = Vec::new();
    for (n, line) in content_lines(text) {
        if let Some(rest) = line.strip_prefix("support:") {
            support = parse_support(rest, n)?;
        } else if let Some(rest) = line.strip_prefix("initial:") {
            let mut cur = Cursor::new(rest);
            let t = parse_term(&mut cur).map_err(|e| e.on_line(n))?;
            cur.expect_end().map_err(|e| e.on_line(n))?;
            initial = Some(t);
        } else if let Some(rest) = line.strip_prefix("schema:") {
            schemas.push(parse_schema(rest, n)?);
        } else {
            return Err(ParseError::new(n, 1, format!("unrecognised line `{line}`")).into());
        }
    }
    Ok(RtmA { support, schemas, initial: initial.ok_or(RtmaError::MissingInitial)? })
}

pub fn emit_rtma(m: &RtmA) -> String {
    let mut out = String::from("support:");
    for a in &m.support {
        out.push_str(&format!(" {a}"));
    }
    out.push_str(&format!("\ninitial: {}\n", m.initial));
    for s in &m.schemas {
        out.push_str(&format!("schema: {s}\n"));
    }
    out
}

/// The gadgets for manipulating atom tuples on the tape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GadgetKind {
    /// Appends a copy of the atom under the head after the atom block.
    Copy,
    /// Guesses an atom, checks it against the tape leftwards, and re-guesses on collision.
    Fresh,
    /// From `⟨code⟩ a1 … an` under `'start`, fires exactly one transition
    /// labelled by the code's pattern at `(a1, …, an)`.
    ProduceLabel(OrbitSet),
}

/// Control state entering the label program of one orbit.
pub fn label_program_state(d: &OrbitDescriptor) -> AtomTerm {
    AtomTerm::Tuple(vec![AtomTerm::constant("lbl"), encode(std::slice::from_ref(d)).to_term()])
}

fn produce_label_schemas(d: &OrbitDescriptor) -> Vec<RuleSchema> {
    use Move::{L, R};
    let code = encode(std::slice::from_ref(d)).to_term().to_string();
    let e = format!("('lbl,{code})");
    let copying = |a: &str| format!("('lblcopy,{code},{a})");
    let back = |a: &str| format!("('lblback,{code},{a})");
    let vars = d.pattern.vars();
    let label = d.pattern.to_string();
    let mut out = vec![RuleSchema::new("'start", &code, "'tau", &code, R, &e)];
    if vars.is_empty() {
        let mut fire = RuleSchema::new(&e, "'_", &label, &label, R, "'finish");
        fire.constraint = d.constraint.clone();
        out.push(fire);
        return out;
    }
    out.push(RuleSchema::new(&e, "a", "'tau", "a", R, &copying("a")));
    out.push(RuleSchema::new(&copying("a"), "b", "'tau", "b", R, &copying("a")));
    out.push(RuleSchema::new(&copying("a"), "'_", "'tau", "(a)", L, &back("a")));
    for i in 2..=vars.len() {
        let prev: Vec<String> = (1..i).map(|j| format!("a{j}")).collect();
        let read = format!("({})", prev.join(","));
        let write = format!("({},a{i})", prev.join(","));
        out.push(RuleSchema::new(&copying(&format!("a{i}")), &read, "'tau", &write, L, &back(&format!("a{i}"))));
    }
    out.push(RuleSchema::new(&back("a"), "b", "'tau", "b", L, &back("a")).with_constraint("a != b"));
    out.push(RuleSchema::new(&back("a"), "a", "'tau", "a", R, &e));
    let tuple = format!("({})", vars.join(","));
    let mut fire = RuleSchema::new(&e, &tuple, &label, &label, R, "'finish");
    fire.constraint = d.constraint.clone();
    out.push(fire);
    out
}

/// The literal schema families of a gadget, as a machine with atoms.
///
/// The label program collects `a1 … an` into one tuple cell by walking back to
/// the nearest earlier occurrence, so it expects pairwise distinct atoms.
pub fn emit_gadget(kind: &GadgetKind) -> RtmA {
    use Move::{L, R};
    match kind {
        GadgetKind::Copy => RtmA {
            support: AtomSet::new(),
            initial: AtomTerm::constant("copy"),
            schemas: vec![
                RuleSchema::new("'copy", "x", "'tau", "x", R, "('copy,x)"),
                RuleSchema::new("('copy,x)", "y", "'tau", "y", R, "('copy,x)"),
                RuleSchema::new("('copy,x)", "'_", "'tau", "x", R, "'finish"),
            ],
        },
        GadgetKind::Fresh => RtmA {
            support: AtomSet::new(),
            initial: AtomTerm::constant("fresh"),
            schemas: vec![
                RuleSchema::new("'fresh", "'_", "'tau", "x", L, "('check,x)"),
                RuleSchema::new("('check,x)", "y", "'tau", "y", L, "('check,x)").with_constraint("x != y"),
                // On a collision walk right to the guess, the last atom before the blank, and replace it.
                RuleSchema::new("('check,x)", "x", "'tau", "x", R, "('refresh,x)"),
                RuleSchema::new("('refresh,x)", "y", "'tau", "y", R, "('refresh,x)"),
                RuleSchema::new("('refresh,x)", "'_", "'tau", "'_", L, "('replace,x)"),
                RuleSchema::new("('replace,x)", "x", "'tau", "y", L, "('check,y)").with_constraint("x != y"),
                RuleSchema::new("('check,x)", "'_", "'tau", "'_", R, "'finish"),
            ],
        },
        GadgetKind::ProduceLabel(labels) => RtmA {
            support: labels.support.clone(),
            initial: AtomTerm::constant("start"),
            schemas: labels.descriptors.iter().flat_map(produce_label_schemas).collect(),
        },
    }
}

/// Prefixes `g` with schemas writing `cells` on the blank tape left to right.
/// With `rewind` the head then returns to the first cell before entering
/// `g.initial`; otherwise the last write enters it with the head just past
/// the written block.
pub fn with_loader(g: &RtmA, cells: &[Pattern], rewind: bool) -> RtmA {
    use Move::{L, R};
    let load = |i: usize| format!("('load,'l{i})");
    let mut schemas = Vec::new();
    let entry = g.initial.to_string();
    for (i, cell) in cells.iter().enumerate() {
        let last = i + 1 == cells.len();
        let target = if last && !rewind { entry.clone() } else { load(i + 1) };
        schemas.push(RuleSchema::new(&load(i), "'_", "'tau", &cell.to_string(), R, &target));
    }
    if rewind {
        schemas.push(RuleSchema::new(&load(cells.len()), "'_", "'tau", "'_", L, "'rewind"));
        schemas.push(RuleSchema::new("'rewind", "z", "'tau", "z", L, "'rewind"));
        let consts: BTreeSet<String> =
            cells.iter().filter(|c| matches!(c, Pattern::Const(_))).map(|c| c.to_string()).collect();
        for c in consts {
            schemas.push(RuleSchema::new("'rewind", &c, "'tau", &c, L, "'rewind"));
        }
        schemas.push(RuleSchema::new("'rewind", "'_", "'tau", "'_", R, &entry));
    }
    schemas.extend(g.schemas.iter().cloned());
    let initial = if cells.is_empty() && !rewind { g.initial.clone() } else { load(0).parse().expect("loader state") };
    RtmA { support: g.support.clone(), schemas, initial }
}

/// One emitted rule of an infinitary machine at a given trigger.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InfRule {
    pub action: AtomTerm,
    pub write: AtomTerm,
    pub mv: Move,
    pub target: AtomTerm,
}

pub type RuleStream<'a> = Box<dyn Iterator<Item = Result<InfRule, String>> + 'a>;

/// The transition relation of an infinitary machine, queried per trigger.
/// Re-querying a trigger must replay the same stream.
pub trait RuleOracle: Send + Sync {
    fn out_rules(&self, state: &AtomTerm, read: &AtomTerm) -> RuleStream<'_>;
}

impl RuleOracle for Rtm {
    fn out_rules(&self, state: &AtomTerm, read: &AtomTerm) -> RuleStream<'_> {
        let (state, read) = (state.clone(), read.clone());
        Box::new(self.rules.iter().filter(move |r| r.source == state && r.read == read).map(|r| {
            Ok(InfRule { action: r.action.clone(), write: r.write.clone(), mv: r.mv, target: r.target.clone() })
        }))
    }
}

/// An infinitary machine backed by a rule oracle.
#[derive(Clone)]
pub struct RtmInf {
    pub initial: AtomTerm,
    pub oracle: Arc<dyn RuleOracle>,
}

impl fmt::Debug for RtmInf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RtmInf").field("initial", &self.initial).finish_non_exhaustive()
    }
}

/// Successors drawn from a bounded prefix of the oracle stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfStep {
    pub successors: Vec<(AtomTerm, Configuration)>,
    pub truncated: bool,
}

/// Steps using the first `budget` rules emitted for the trigger of `c`.
pub fn step_inf(m: &RtmInf, c: &Configuration, budget: usize) -> Result<InfStep, RtmError> {
    let mut stream = m.oracle.out_rules(&c.state, c.tape.read());
    let mut successors: Vec<(AtomTerm, Configuration)> = Vec::new();
    for r in stream.by_ref().take(budget) {
        let r = r.map_err(RtmError::Oracle)?;
        let next = Configuration { state: r.target, tape: c.tape.write_move(&r.write, r.mv).normalized() };
        if !successors.contains(&(r.action.clone(), next.clone())) {
            successors.push((r.action, next));
        }
    }
    let truncated = stream.next().is_some();
    Ok(InfStep { successors, truncated })
}

/// Breadth-first configuration graph of an infinitary machine.
pub fn config_lts_inf(m: &RtmInf, depth: usize, budget: usize) -> Result<Exploration, RtmError> {
    explore(Configuration::initial(m.initial.clone()), depth, |c| c.to_term().to_string(), |c| {
        let s = step_inf(m, c, budget)?;
        Ok((s.successors, s.truncated))
    })
}
