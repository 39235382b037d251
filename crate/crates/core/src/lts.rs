//! Labelled transition systems: finite graphs, descriptor-presented systems
//! with atoms, enumerator-backed effective systems, and bounded exploration.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::hash::Hash;
use std::sync::Arc;

use thiserror::Error;

use crate::atoms::{canonicalize, fresh_n, parse_term, Atom, AtomSet, AtomTerm, Nominal};
use crate::orbitsets::{
    canonical_enumerate, canonical_valuations, decode, decode_triple, encode, encode_triple, member, state_descriptor,
    triple_descriptor, Binding, OrbitDescriptor, OrbitError, OrbitSet, Pattern, SetBuilderCode,
};
use crate::syntax::{content_lines, Cursor, ParseError};

/// Default cap on emissions drawn from one enumerator stream.
pub const DEFAULT_STREAM_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LtsError {
    #[error("unknown state {0}")]
    UnknownState(usize),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error("code {0} does not describe a single orbit of states")]
    NotAStateCode(String),
    #[error("emitted triple {triple} does not start at the queried state {state}")]
    SourceMismatch { triple: String, state: String },
    #[error("enumerator failed: {0}")]
    Enumerator(String),
}

/// A finite graph with named states `0..n`; `'tau` is the silent label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteLts {
    pub names: Vec<String>,
    pub transitions: Vec<(usize, AtomTerm, usize)>,
    pub initial: usize,
}

impl FiniteLts {
    /// States named by their indices.
    pub fn new(num_states: usize, transitions: Vec<(usize, AtomTerm, usize)>, initial: usize) -> Self {
        FiniteLts { names: (0..num_states).map(|i| i.to_string()).collect(), transitions, initial }
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    /// Outgoing transitions of every state, indexed by state.
    pub fn successors(&self) -> Vec<Vec<(AtomTerm, usize)>> {
        let mut out = vec![Vec::new(); self.num_states()];
        for (s, a, t) in &self.transitions {
            out[*s].push((a.clone(), *t));
        }
        out
    }

    /// Checks that the initial state and all endpoints exist.
    pub fn validate(&self) -> Result<(), LtsError> {
        let n = self.num_states();
        if self.initial >= n {
            return Err(LtsError::UnknownState(self.initial));
        }
        for (s, _, t) in &self.transitions {
            if *s >= n {
                return Err(LtsError::UnknownState(*s));
            }
            if *t >= n {
                return Err(LtsError::UnknownState(*t));
            }
        }
        Ok(())
    }

    /// The same graph with state i renumbered to perm[i].
    pub fn renumbered(&self, perm: &[usize]) -> FiniteLts {
        let mut names = vec![String::new(); self.num_states()];
        for (i, n) in self.names.iter().enumerate() {
            names[perm[i]] = n.clone();
        }
        FiniteLts {
            names,
            transitions: self.transitions.iter().map(|(s, a, t)| (perm[*s], a.clone(), perm[*t])).collect(),
            initial: perm[self.initial],
        }
    }

    /// Graph equality after identifying states by name.
    pub fn same_by_names(&self, other: &FiniteLts) -> bool {
        use std::collections::BTreeSet;
        let edges = |l: &FiniteLts| {
            l.transitions
                .iter()
                .map(|(s, a, t)| (l.names[*s].clone(), a.clone(), l.names[*t].clone()))
                .collect::<BTreeSet<_>>()
        };
        let names = |l: &FiniteLts| l.names.iter().cloned().collect::<BTreeSet<_>>();
        self.names[self.initial] == other.names[other.initial]
            && names(self) == names(other)
            && edges(self) == edges(other)
    }
}

/// `{(a, t) | s →a t}`.
pub fn out_concrete(l: &FiniteLts, s: usize) -> Result<Vec<(AtomTerm, usize)>, LtsError> {
    if s >= l.num_states() {
        return Err(LtsError::UnknownState(s));
    }
    let mut out: Vec<(AtomTerm, usize)> =
        l.transitions.iter().filter(|(from, _, _)| *from == s).map(|(_, a, t)| (a.clone(), *t)).collect();
    out.sort();
    out.dedup();
    Ok(out)
}

/// Text of a label inside `.aut` quotes: constants print bare, other terms in term syntax.
pub fn label_text(label: &AtomTerm) -> String {
    match label {
        AtomTerm::Const(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Inverse of [`label_text`]: bare text is a constant unless it reads as a term.
pub fn label_from_text(text: &str) -> AtomTerm {
    if text.starts_with(['#', '(', '\'']) {
        if let Ok(t) = text.parse::<AtomTerm>() {
            return t;
        }
    }
    AtomTerm::Const(text.to_string())
}

fn parse_aut_header(line: &str) -> Result<(usize, usize, usize), ParseError> {
    let mut cur = Cursor::new(line);
    if !cur.eat_str("des") {
        return Err(cur.error("expected header 'des (<init>,<transitions>,<states>)'"));
    }
    cur.expect('(')?;
    let mut nums = [0usize; 3];
    for (i, n) in nums.iter_mut().enumerate() {
        if i > 0 {
            cur.expect(',')?;
        }
        cur.skip_ws();
        *n = cur.take_while(|c| c.is_ascii_digit()).parse().map_err(|_| cur.error("expected a number"))?;
    }
    cur.expect(')')?;
    cur.expect_end()?;
    Ok((nums[0], nums[1], nums[2]))
}

fn parse_aut_line(line: &str) -> Result<(usize, AtomTerm, usize), ParseError> {
    let mut cur = Cursor::new(line);
    cur.expect('(')?;
    cur.skip_ws();
    let from = cur.take_while(|c| c.is_ascii_digit()).parse().map_err(|_| cur.error("expected a source state"))?;
    cur.expect(',')?;
    cur.expect('"')?;
    let label = cur.take_while(|c| c != '"');
    if !cur.eat('"') {
        return Err(cur.error("unterminated label"));
    }
    cur.expect(',')?;
    cur.skip_ws();
    let to = cur.take_while(|c| c.is_ascii_digit()).parse().map_err(|_| cur.error("expected a target state"))?;
    cur.expect(')')?;
    cur.expect_end()?;
    Ok((from, label_from_text(&label), to))
}

/// Parses the Aldebaran `.aut` format.
pub fn parse_aut(text: &str) -> Result<FiniteLts, LtsError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| ParseError::new(1, 1, "empty file"))?;
    let (initial, m, n) = parse_aut_header(header.trim()).map_err(|e| e.on_line(hline + 1))?;
    let mut transitions = Vec::with_capacity(m);
    for (i, line) in lines {
        let (s, a, t) = parse_aut_line(line.trim()).map_err(|e| e.on_line(i + 1))?;
        if s >= n || t >= n {
            return Err(ParseError::new(i + 1, 1, format!("state out of range 0..{n}")).into());
        }
        transitions.push((s, a, t));
    }
    if transitions.len() != m {
        return Err(ParseError::new(hline + 1, 1, format!("header declares {m} transitions, found {}", transitions.len())).into());
    }
    if initial >= n.max(1) {
        return Err(ParseError::new(hline + 1, 1, "initial state out of range").into());
    }
    Ok(FiniteLts::new(n.max(1), transitions, initial))
}

/// Emits `.aut` text; the inverse of [`parse_aut`] on its own output.
pub fn emit_aut(l: &FiniteLts) -> String {
    let mut out = format!("des ({},{},{})\n", l.initial, l.transitions.len(), l.num_states());
    for (s, a, t) in &l.transitions {
        out.push_str(&format!("({s},\"{}\",{t})\n", label_text(a)));
    }
    out
}

/// Graphviz rendering, mostly for eyeballing small graphs.
pub fn emit_dot(l: &FiniteLts) -> String {
    let mut out = String::from("digraph lts {\n  rankdir=LR;\n");
    for (i, n) in l.names.iter().enumerate() {
        let shape = if i == l.initial { "doublecircle" } else { "circle" };
        out.push_str(&format!("  {i} [shape={shape},label=\"{}\"];\n", n.replace('"', "\\\"")));
    }
    for (s, a, t) in &l.transitions {
        out.push_str(&format!("  {s} -> {t} [label=\"{}\"];\n", label_text(a).replace('"', "\\\"")));
    }
    out.push_str("}\n");
    out
}

/// Outcome of a depth-bounded breadth-first exploration.
///
/// `lts` holds states within `depth` steps and the transitions of states
/// strictly closer than `depth`. `closed` holds when no state at the bound
/// has a successor outside the explored set; `frontier` then lists the
/// omitted transitions of states at the bound.
#[derive(Debug, Clone)]
pub struct Exploration {
    pub lts: FiniteLts,
    pub closed: bool,
    pub frontier: Vec<(usize, AtomTerm, usize)>,
    pub truncated: bool,
}

impl Exploration {
    /// The full reachable graph, available when the exploration closed.
    pub fn complete(&self) -> Option<FiniteLts> {
        self.closed.then(|| {
            let mut l = self.lts.clone();
            l.transitions.extend(self.frontier.iter().cloned());
            l
        })
    }
}

/// Successors of one state plus a flag telling whether a stream was cut short.
pub type Expansion<S> = (Vec<(AtomTerm, S)>, bool);

/// Breadth-first exploration from `init`, numbering states in discovery order.
pub fn explore<S, E>(
    init: S,
    depth: usize,
    name: impl Fn(&S) -> String,
    mut succ: impl FnMut(&S) -> Result<Expansion<S>, E>,
) -> Result<Exploration, E>
where
    S: Clone + Eq + Hash,
{
    let mut index: HashMap<S, usize> = HashMap::new();
    let mut states: Vec<S> = vec![init.clone()];
    let mut dist: Vec<usize> = vec![0];
    index.insert(init, 0);
    let mut queue = VecDeque::from([0usize]);
    let mut transitions = Vec::new();
    let mut frontier = Vec::new();
    let mut closed = true;
    let mut truncated = false;
    while let Some(i) = queue.pop_front() {
        let (succs, cut) = succ(&states[i].clone())?;
        truncated |= cut;
        let mut seen_here = std::collections::HashSet::new();
        for (a, t) in succs {
            let at_bound = dist[i] >= depth;
            let j = match index.get(&t) {
                Some(&j) => j,
                None if at_bound => {
                    closed = false;
                    continue;
                }
                None => {
                    let j = states.len();
                    index.insert(t.clone(), j);
                    states.push(t);
                    dist.push(dist[i] + 1);
                    queue.push_back(j);
                    j
                }
            };
            if !seen_here.insert((a.clone(), j)) {
                continue;
            }
            if at_bound {
                frontier.push((i, a, j));
            } else {
                transitions.push((i, a, j));
            }
        }
    }
    if !closed {
        frontier.clear();
    }
    let lts = FiniteLts { names: states.iter().map(name).collect(), transitions, initial: 0 };
    Ok(Exploration { lts, closed, frontier, truncated })
}

/// A transition system with atoms presented by descriptors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicLtsA {
    pub support: AtomSet,
    pub state_space: OrbitSet,
    pub transition_space: OrbitSet,
    pub initial: AtomTerm,
}

fn split_triple(d: &OrbitDescriptor) -> Option<(&Pattern, &Pattern, &Pattern)> {
    match &d.pattern {
        Pattern::Tuple(ps) if ps.len() == 3 => Some((&ps[0], &ps[1], &ps[2])),
        _ => None,
    }
}

impl SymbolicLtsA {
    /// Outgoing transitions of a state, one per orbit over `K ∪ atoms(state)`,
    /// with new atoms instantiated canonically. Targets are not canonicalized.
    pub fn successors(&self, state: &AtomTerm) -> Vec<(AtomTerm, AtomTerm)> {
        let mut out = Vec::new();
        for d in &self.transition_space.descriptors {
            let Some((ps, pa, pt)) = split_triple(d) else { continue };
            let mut b = Binding::new();
            if !ps.match_term(state, &mut b) {
                continue;
            }
            let mut rest = pa.vars();
            for v in pt.vars() {
                if !rest.contains(&v) {
                    rest.push(v);
                }
            }
            rest.retain(|v| !b.contains_key(v));
            for val in canonical_valuations(&rest, &b, &self.support, &d.constraint) {
                let (Ok(a), Ok(t)) = (pa.instantiate(&val), pt.instantiate(&val)) else { continue };
                if !out.contains(&(a.clone(), t.clone())) {
                    out.push((a, t));
                }
            }
        }
        out
    }

    /// Structural checks; returns a list of human-readable problems.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let verdict = check_k_supported(self);
        if !verdict.accepted {
            problems.push(format!("constants outside the support: {}", render_atoms(&verdict.offending)));
        }
        if !member(&self.initial, &self.state_space) {
            problems.push(format!("initial state {} is not in the state space", self.initial));
        }
        for d in &self.transition_space.descriptors {
            if split_triple(d).is_none() {
                problems.push(format!("transition descriptor `{d}` is not a triple"));
                continue;
            }
            let one = OrbitSet::new(self.support.clone(), vec![d.clone()]);
            for inst in canonical_enumerate(&one) {
                if let AtomTerm::Tuple(parts) = &inst {
                    for end in [&parts[0], &parts[2]] {
                        if !member(end, &self.state_space) {
                            problems.push(format!("transition `{d}` reaches {end} outside the state space"));
                        }
                    }
                }
            }
        }
        problems.dedup();
        problems
    }
}

pub(crate) fn render_atoms(atoms: &AtomSet) -> String {
    atoms.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")
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

/// Parses `support:` / `initial:` headers followed by `states:` and
/// `transitions:` sections of `orbit` lines.
pub fn parse_ltsa(text: &str) -> Result<SymbolicLtsA, LtsError> {
    let mut support = None;
    let mut initial = None;
    let mut states = Vec::new();
    let mut transitions = Vec::new();
    let mut section: Option<bool> = None;
    for (n, line) in content_lines(text) {
        if let Some(rest) = line.strip_prefix("support:") {
            support = Some(parse_support(rest, n)?);
        } else if let Some(rest) = line.strip_prefix("initial:") {
            let mut cur = Cursor::new(rest);
            let t = parse_term(&mut cur).map_err(|e| e.on_line(n))?;
            cur.expect_end().map_err(|e| e.on_line(n))?;
            initial = Some(t);
        } else if line == "states:" {
            section = Some(false);
        } else if line == "transitions:" {
            section = Some(true);
        } else if line.starts_with("orbit") {
            let d: OrbitDescriptor = line.parse().map_err(|e: ParseError| e.on_line(n))?;
            match section {
                Some(false) => states.push(d),
                Some(true) => {
                    if split_triple(&d).is_none() {
                        return Err(ParseError::new(n, 1, "transition descriptors must be (source,label,target) triples").into());
                    }
                    transitions.push(d)
                }
                None => return Err(ParseError::new(n, 1, "orbit line outside a states:/transitions: section").into()),
            }
        } else {
            return Err(ParseError::new(n, 1, format!("unrecognised line `{line}`")).into());
        }
    }
    let support = support.ok_or_else(|| ParseError::new(1, 1, "missing support: header"))?;
    let initial = initial.ok_or_else(|| ParseError::new(1, 1, "missing initial: header"))?;
    Ok(SymbolicLtsA {
        state_space: OrbitSet::new(support.clone(), states),
        transition_space: OrbitSet::new(support.clone(), transitions),
        support,
        initial,
    })
}

pub fn emit_ltsa(l: &SymbolicLtsA) -> String {
    let mut out = String::from("support:");
    for a in &l.support {
        out.push_str(&format!(" {a}"));
    }
    out.push_str(&format!("\ninitial: {}\nstates:\n", l.initial));
    for d in &l.state_space.descriptors {
        out.push_str(&format!("{d}\n"));
    }
    out.push_str("transitions:\n");
    for d in &l.transition_space.descriptors {
        out.push_str(&format!("{d}\n"));
    }
    out
}

/// Verdict of [`check_k_supported`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportVerdict {
    pub accepted: bool,
    pub offending: AtomSet,
}

/// Accepts iff every explicit atom of the presentation lies in its support.
pub fn check_k_supported(l: &SymbolicLtsA) -> SupportVerdict {
    let mut used: AtomSet = l.state_space.descriptors.iter().flat_map(|d| d.atoms()).collect();
    used.extend(l.transition_space.descriptors.iter().flat_map(|d| d.atoms()));
    used.extend(crate::atoms::support_of(&l.initial));
    let offending: AtomSet = used.difference(&l.support).copied().collect();
    SupportVerdict { accepted: offending.is_empty(), offending }
}

/// Stream of triple codes answering one `out` query.
pub type CodeStream<'a> = Box<dyn Iterator<Item = Result<SetBuilderCode, LtsError>> + 'a>;

/// The recursively enumerable `out` function of an effective system.
pub trait Enumerator: Send + Sync {
    fn out(&self, state: &SetBuilderCode) -> Result<CodeStream<'_>, LtsError>;
}

/// Triple codes drawn from one stream, with a truncation flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutBatch {
    pub codes: Vec<SetBuilderCode>,
    pub truncated: bool,
}

/// An effective transition system with atoms.
#[derive(Clone)]
pub struct EffectiveLtsA {
    pub support: AtomSet,
    pub initial: (SetBuilderCode, Vec<Atom>),
    pub enumerator: Arc<dyn Enumerator>,
    pub cap: usize,
}

impl fmt::Debug for EffectiveLtsA {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EffectiveLtsA")
            .field("support", &self.support)
            .field("initial", &self.initial)
            .field("cap", &self.cap)
            .finish_non_exhaustive()
    }
}

/// The code and valuation presenting the orbit of a state over `k`.
pub fn encode_state(t: &AtomTerm, k: &AtomSet) -> (SetBuilderCode, Vec<Atom>) {
    let (d, abar) = state_descriptor(t, k);
    (encode(&[d]), abar)
}

/// The single descriptor of a state code.
pub fn state_code_descriptor(code: &SetBuilderCode) -> Result<OrbitDescriptor, LtsError> {
    let mut ds = decode(code)?;
    if ds.len() != 1 {
        return Err(LtsError::NotAStateCode(code.to_string()));
    }
    Ok(ds.remove(0))
}

/// The state denoted by a code and a valuation of its pattern variables.
pub fn decode_state(code: &SetBuilderCode, abar: &[Atom]) -> Result<AtomTerm, LtsError> {
    let d = state_code_descriptor(code)?;
    let vars = d.pattern.vars();
    if vars.len() != abar.len() {
        return Err(LtsError::NotAStateCode(code.to_string()));
    }
    let b: Binding = vars.into_iter().zip(abar.iter().copied()).collect();
    Ok(crate::orbitsets::instantiate(&d, &b)?)
}

/// The canonical representative of a state code over `k`: pattern variables
/// take the least atoms outside `k`, in order.
pub fn representative(code: &SetBuilderCode, k: &AtomSet) -> Result<AtomTerm, LtsError> {
    let d = state_code_descriptor(code)?;
    let abar = fresh_n(k, d.pattern.vars().len());
    decode_state(code, &abar).map_err(|_| LtsError::NotAStateCode(code.to_string()))
}

/// Abstracts concrete successors of a representative state into triple codes.
pub fn triple_codes(state: &AtomTerm, succs: &[(AtomTerm, AtomTerm)], k: &AtomSet) -> Vec<SetBuilderCode> {
    succs.iter().map(|(a, t)| encode_triple(&triple_descriptor(state, a, t, k).0)).collect()
}

/// An enumerator computing `out` from concrete successors of the canonical
/// representative of each queried orbit.
pub struct RepresentativeEnumerator<F> {
    pub support: AtomSet,
    pub successors: F,
}

impl<F> Enumerator for RepresentativeEnumerator<F>
where
    F: Fn(&AtomTerm) -> Result<Vec<(AtomTerm, AtomTerm)>, LtsError> + Send + Sync,
{
    fn out(&self, state: &SetBuilderCode) -> Result<CodeStream<'_>, LtsError> {
        let r = representative(state, &self.support)?;
        let succs = (self.successors)(&r)?;
        Ok(Box::new(triple_codes(&r, &succs, &self.support).into_iter().map(Ok)))
    }
}

impl EffectiveLtsA {
    /// Wraps a concrete successor function on canonical representatives.
    pub fn from_successors<F>(support: AtomSet, initial: &AtomTerm, successors: F) -> Self
    where
        F: Fn(&AtomTerm) -> Result<Vec<(AtomTerm, AtomTerm)>, LtsError> + Send + Sync + 'static,
    {
        EffectiveLtsA {
            initial: encode_state(initial, &support),
            enumerator: Arc::new(RepresentativeEnumerator { support: support.clone(), successors }),
            support,
            cap: DEFAULT_STREAM_CAP,
        }
    }

    /// The effective presentation of a symbolic system.
    pub fn from_symbolic(l: &SymbolicLtsA) -> Self {
        let sys = l.clone();
        EffectiveLtsA::from_successors(l.support.clone(), &l.initial, move |s| Ok(sys.successors(s)))
    }

    /// Draws at most `cap` codes from `out(state)`.
    pub fn out_capped(&self, state: &SetBuilderCode) -> Result<OutBatch, LtsError> {
        let mut stream = self.enumerator.out(state)?;
        let mut codes = Vec::new();
        for item in stream.by_ref().take(self.cap) {
            codes.push(item?);
        }
        let truncated = stream.next().is_some();
        Ok(OutBatch { codes, truncated })
    }

    /// Canonical successors of a canonical state: each emitted triple is
    /// re-instantiated over `K ∪ atoms(state)` with canonical fresh atoms.
    pub fn successors(&self, state: &AtomTerm) -> Result<Expansion<AtomTerm>, LtsError> {
        let (code, _) = encode_state(state, &self.support);
        let batch = self.out_capped(&code)?;
        let mut out = Vec::new();
        for c in &batch.codes {
            let tri = decode_triple(c)?;
            let mut b = Binding::new();
            if !tri.source.match_term(state, &mut b) {
                return Err(LtsError::SourceMismatch { triple: tri.as_descriptor().to_string(), state: state.to_string() });
            }
            let rest: Vec<String> = tri.vars().into_iter().filter(|v| !b.contains_key(v)).collect();
            for val in canonical_valuations(&rest, &b, &self.support, &tri.constraint) {
                let (Ok(a), Ok(t)) = (tri.action.instantiate(&val), tri.target.instantiate(&val)) else { continue };
                let t = canonicalize(&t, &self.support).0;
                if !out.contains(&(a.clone(), t.clone())) {
                    out.push((a, t));
                }
            }
        }
        Ok((out, batch.truncated))
    }

    pub fn initial_state(&self) -> Result<AtomTerm, LtsError> {
        Ok(canonicalize(&decode_state(&self.initial.0, &self.initial.1)?, &self.support).0)
    }
}

/// Systems that can be explored as orbit quotients.
pub trait OrbitQuotient {
    fn quotient_support(&self) -> &AtomSet;
    fn quotient_initial(&self) -> Result<AtomTerm, LtsError>;
    fn quotient_successors(&self, state: &AtomTerm) -> Result<Expansion<AtomTerm>, LtsError>;
}

impl OrbitQuotient for SymbolicLtsA {
    fn quotient_support(&self) -> &AtomSet {
        &self.support
    }
    fn quotient_initial(&self) -> Result<AtomTerm, LtsError> {
        Ok(canonicalize(&self.initial, &self.support).0)
    }
    fn quotient_successors(&self, state: &AtomTerm) -> Result<Expansion<AtomTerm>, LtsError> {
        let succ = self
            .successors(state)
            .into_iter()
            .map(|(a, t)| (a, canonicalize(&t, &self.support).0))
            .collect::<Vec<_>>();
        Ok((succ, false))
    }
}

impl OrbitQuotient for EffectiveLtsA {
    fn quotient_support(&self) -> &AtomSet {
        &self.support
    }
    fn quotient_initial(&self) -> Result<AtomTerm, LtsError> {
        self.initial_state()
    }
    fn quotient_successors(&self, state: &AtomTerm) -> Result<Expansion<AtomTerm>, LtsError> {
        self.successors(state)
    }
}

/// The orbit-quotient reachable graph to the given depth, with states in
/// canonical form over the support and labels in the frame of their source.
pub fn bounded_reach<L: OrbitQuotient + ?Sized>(l: &L, depth: usize) -> Result<Exploration, LtsError> {
    let init = l.quotient_initial()?;
    explore(init, depth, |s: &AtomTerm| s.to_string(), |s| l.quotient_successors(s))
}

impl Nominal for FiniteLts {
    fn visit_atoms(&self, f: &mut dyn FnMut(Atom)) {
        self.transitions.iter().for_each(|(_, a, _)| a.visit_atoms(f))
    }
    fn rename_atoms(&self, f: &mut dyn FnMut(Atom) -> Atom) -> Self {
        FiniteLts {
            names: self.names.clone(),
            transitions: self.transitions.iter().map(|(s, a, t)| (*s, a.rename_atoms(f), *t)).collect(),
            initial: self.initial,
        }
    }
}
