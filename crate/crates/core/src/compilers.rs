//! Translators from transition systems to machines, and round-trip
//! verification of the results.
//!
//! The countable and the atom compilers delegate the enumeration of outgoing
//! transitions to the source's enumerator: each query surfaces as one τ-step
//! of the machine instead of a tape-level computation of `out`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use crate::atoms::{fresh_n, support_of, Atom, AtomSet, AtomTerm};
use crate::bisim::{branching_bisim, dp_branching_bisim, BisimVerdict};
use crate::lts::{bounded_reach, decode_state, encode_state, EffectiveLtsA, Exploration, FiniteLts, OrbitQuotient};
use crate::orbitsets::{
    canonical_valuations, decode, decode_triple, encode, project, Binding, Component, OrbitDescriptor, OrbitSet,
    SetBuilderCode, TripleDescriptor,
};
use crate::rtm::{config_lts, Configuration, Move, Rtm, RtmRule, Tape};
use crate::rtm_atoms::{
    config_lts_canonical, config_lts_inf, emit_gadget, emit_rtma, step_canonical, AtomMachine, GadgetKind, InfRule,
    RtmA, RtmInf, RuleOracle, RuleStream,
};

fn state_symbol(i: usize) -> AtomTerm {
    AtomTerm::constant(format!("st{i}"))
}

/// The three-state machine `up`, `s`, `t` simulating a finite system: the
/// tape holds one symbol `'st<i>` for the current state `i`.
pub fn compile_lts_to_rtminf(l: &FiniteLts) -> Rtm {
    let (up, s, t) = (AtomTerm::constant("up"), AtomTerm::constant("s"), AtomTerm::constant("t"));
    let mut rules = vec![
        RtmRule {
            source: up.clone(),
            read: AtomTerm::blank(),
            action: AtomTerm::tau(),
            write: state_symbol(l.initial),
            mv: Move::R,
            target: s.clone(),
        },
        RtmRule { source: s.clone(), read: AtomTerm::blank(), action: AtomTerm::tau(), write: AtomTerm::blank(), mv: Move::L, target: t.clone() },
    ];
    for (from, a, to) in &l.transitions {
        let rule = RtmRule {
            source: t.clone(),
            read: state_symbol(*from),
            action: a.clone(),
            write: state_symbol(*to),
            mv: Move::R,
            target: s.clone(),
        };
        if !rules.contains(&rule) {
            rules.push(rule);
        }
    }
    Rtm { rules, initial: up }
}

/// Rule oracle of the countable variant: data symbols `('st, state)` name
/// canonical states of an orbit quotient.
struct QuotientOracle<L> {
    source: L,
}

impl<L: OrbitQuotient + Send + Sync> RuleOracle for QuotientOracle<L> {
    fn out_rules(&self, state: &AtomTerm, read: &AtomTerm) -> RuleStream<'_> {
        let sym = |s: AtomTerm| AtomTerm::Tuple(vec![AtomTerm::constant("st"), s]);
        let rule = |action, write, mv, target: &str| InfRule { action, write, mv, target: AtomTerm::constant(target) };
        match (state, read) {
            (AtomTerm::Const(q), r) if q == "up" && r.is_blank() => match self.source.quotient_initial() {
                Ok(i) => Box::new(std::iter::once(Ok(rule(AtomTerm::tau(), sym(i), Move::R, "s")))),
                Err(e) => Box::new(std::iter::once(Err(e.to_string()))),
            },
            (AtomTerm::Const(q), r) if q == "s" && r.is_blank() => {
                Box::new(std::iter::once(Ok(rule(AtomTerm::tau(), AtomTerm::blank(), Move::L, "t"))))
            }
            (AtomTerm::Const(q), AtomTerm::Tuple(parts)) if q == "t" && parts.len() == 2 && parts[0] == AtomTerm::constant("st") => {
                match self.source.quotient_successors(&parts[1]) {
                    Ok((succ, _)) => Box::new(succ.into_iter().map(move |(a, t)| Ok(rule(a, sym(t), Move::R, "s")))),
                    Err(e) => Box::new(std::iter::once(Err(e.to_string()))),
                }
            }
            _ => Box::new(std::iter::empty()),
        }
    }
}

/// The countable variant: an infinitary machine whose data symbols are the
/// canonical states of `l`, with `out` answered by the source.
pub fn compile_quotient_to_rtminf<L: OrbitQuotient + Send + Sync + 'static>(l: L) -> RtmInf {
    RtmInf { initial: AtomTerm::constant("up"), oracle: Arc::new(QuotientOracle { source: l }) }
}

fn c(name: &str) -> AtomTerm {
    AtomTerm::constant(name)
}

/// Runs a gadget from `start` while it has exactly one successor, returning
/// the actions performed and the final configuration.
fn run_gadget(g: &RtmA, start: Configuration, limit: usize) -> (Vec<AtomTerm>, Configuration) {
    let mut cur = start;
    let mut actions = Vec::new();
    for _ in 0..limit {
        let mut next = step_canonical(g, &cur);
        if next.len() != 1 {
            break;
        }
        let (a, n) = next.remove(0);
        actions.push(a);
        cur = n;
    }
    (actions, cur)
}

fn label_cell(a: AtomTerm) -> AtomTerm {
    AtomTerm::Tuple(vec![AtomTerm::constant("label"), a])
}

/// Stage data recovered from a configuration of the compiled machine.
struct Layout {
    state_code: SetBuilderCode,
    abar: Vec<Atom>,
    triple: Option<(SetBuilderCode, TripleDescriptor)>,
    values: Vec<Atom>,
    label: Option<AtomTerm>,
}

fn read_layout(tape: &Tape) -> Option<Layout> {
    let cells = &tape.cells;
    let state_code = SetBuilderCode::from_term(cells.first()?)?;
    let mut i = 1;
    let mut abar = Vec::new();
    while let Some(a) = cells.get(i).and_then(AtomTerm::as_atom) {
        abar.push(a);
        i += 1;
    }
    let triple = match cells.get(i) {
        Some(t) => {
            let code = SetBuilderCode::from_term(t)?;
            let d = decode_triple(&code).ok()?;
            i += 1;
            Some((code, d))
        }
        None => None,
    };
    let mut rest = &cells[i.min(cells.len())..];
    let mut label = None;
    if let Some((AtomTerm::Tuple(parts), init)) = rest.split_last() {
        if parts.len() == 2 && parts[0] == AtomTerm::constant("label") {
            label = Some(parts[1].clone());
            rest = init;
        }
    }
    let values = rest.iter().map(AtomTerm::as_atom).collect::<Option<Vec<_>>>()?;
    Some(Layout { state_code, abar, triple, values, label })
}

fn layout_tape(code: &SetBuilderCode, abar: &[Atom], rest: &[AtomTerm]) -> Tape {
    let mut cells = vec![code.to_term()];
    cells.extend(abar.iter().map(|a| AtomTerm::Atom(*a)));
    cells.extend(rest.iter().cloned());
    let head = if rest.is_empty() { 0 } else { cells.len() - 1 };
    Tape::new(cells, head)
}

/// The staged machine simulating an effective system with atoms.
///
/// Control states and tape layouts (`⟨c⟩` a code symbol, `ā` atoms):
///
/// * `'up` on the blank tape writes `⟨s↑⟩ ā↑` and enters `'enumerate`;
/// * `'enumerate` with `⟨s⟩ ā` either keeps searching (a τ-loop) or appends
///   one triple code `⟨s,a,t⟩` from the enumerator, entering `'generate`;
/// * `'generate` copies the source variables of the triple from `ā` with the
///   copy gadget, entering `'valuate` with the values appended;
/// * `'valuate` picks a value for the next remaining variable (an atom of the
///   support or tape, or one fresh atom), or, when none remain, runs the label
///   gadget on `⟨a⟩ ā_a`, appends its label `('label, a)` and enters `'fire`;
/// * `'fire` either performs `a` into `'enumerate` with `⟨t⟩ ā_t`, or
///   returns by τ to `'enumerate` with `⟨s⟩ ā`.
///
/// No control state holds atoms, so a canonical configuration names the atoms
/// of `ā` exactly as the canonical source state does, and labels agree.
pub struct CompiledRtmA {
    source: EffectiveLtsA,
    copy: RtmA,
    truncated: AtomicBool,
    failures: Mutex<Vec<String>>,
    labels: Mutex<BTreeSet<OrbitDescriptor>>,
}

pub fn compile_ltsa_to_rtma(l: &EffectiveLtsA) -> CompiledRtmA {
    CompiledRtmA {
        source: l.clone(),
        copy: emit_gadget(&GadgetKind::Copy),
        truncated: AtomicBool::new(false),
        failures: Mutex::new(Vec::new()),
        labels: Mutex::new(BTreeSet::new()),
    }
}

impl CompiledRtmA {
    /// Whether some enumerator query hit the emission cap.
    pub fn truncated(&self) -> bool {
        self.truncated.load(Ordering::Relaxed)
    }

    /// Enumerator and decoding failures met while stepping.
    pub fn failures(&self) -> Vec<String> {
        self.failures.lock().expect("failure log").clone()
    }

    fn fail(&self, msg: String) {
        let mut f = self.failures.lock().expect("failure log");
        if !f.contains(&msg) {
            f.push(msg);
        }
    }

    /// The gadget library the oracle stages run, as `.rtma` text: the copy
    /// gadget and label programs for every action orbit met so far.
    pub fn emit(&self) -> String {
        let labels: Vec<OrbitDescriptor> = self.labels.lock().expect("label log").iter().cloned().collect();
        let mut out = String::from(
            "# stages 'up, 'enumerate, 'generate, 'valuate and 'fire run as host oracle steps\n\
             # the schemas below are the gadgets those steps execute\n",
        );
        let mut lib = emit_gadget(&GadgetKind::Copy);
        let label_gadget = emit_gadget(&GadgetKind::ProduceLabel(OrbitSet::new(self.source.support.clone(), labels)));
        lib.support = self.source.support.clone();
        lib.schemas.extend(label_gadget.schemas);
        out.push_str(&emit_rtma(&lib));
        out
    }

    fn enumerate(&self, l: &Layout, tape: &Tape) -> Vec<(AtomTerm, Configuration)> {
        let mut out = vec![(AtomTerm::tau(), Configuration { state: c("enumerate"), tape: tape.clone() })];
        match self.source.out_capped(&l.state_code) {
            Ok(batch) => {
                if batch.truncated {
                    self.truncated.store(true, Ordering::Relaxed);
                }
                for code in batch.codes {
                    let t = layout_tape(&l.state_code, &l.abar, &[code.to_term()]);
                    let next = (AtomTerm::tau(), Configuration { state: c("generate"), tape: t });
                    if !out.contains(&next) {
                        out.push(next);
                    }
                }
            }
            Err(e) => self.fail(e.to_string()),
        }
        out
    }

    fn source_binding(&self, l: &Layout, tri: &TripleDescriptor) -> Option<Binding> {
        let s = decode_state(&l.state_code, &l.abar).ok()?;
        let mut b = Binding::new();
        if !tri.source.match_term(&s, &mut b) {
            self.fail(format!("triple `{}` does not start at {s}", tri.as_descriptor()));
            return None;
        }
        Some(b)
    }

    fn generate(&self, l: &Layout) -> Vec<(AtomTerm, Configuration)> {
        let Some((code, tri)) = &l.triple else { return Vec::new() };
        let Some(b) = self.source_binding(l, tri) else { return Vec::new() };
        let mut scratch: Vec<AtomTerm> = l.abar.iter().map(|a| AtomTerm::Atom(*a)).collect();
        for v in tri.source.vars() {
            let pos = l.abar.iter().position(|a| Some(a) == b.get(&v)).expect("source atoms come from the tape");
            let start = Configuration { state: c("copy"), tape: Tape::new(scratch.clone(), pos) };
            let (_, end) = run_gadget(&self.copy, start, 4 * scratch.len() + 8);
            scratch = end.tape.cells.into_iter().filter(|x| !x.is_blank()).collect();
        }
        let copied = scratch[l.abar.len()..].to_vec();
        let mut rest = vec![code.to_term()];
        rest.extend(copied);
        vec![(AtomTerm::tau(), Configuration { state: c("valuate"), tape: layout_tape(&l.state_code, &l.abar, &rest) })]
    }

    fn valuate(&self, l: &Layout, cfg: &Configuration) -> Vec<(AtomTerm, Configuration)> {
        let Some((code, tri)) = &l.triple else { return Vec::new() };
        let vars = tri.vars();
        let b: Binding = vars.iter().cloned().zip(l.values.iter().copied()).collect();
        if l.values.len() < vars.len() {
            let mut protected = self.source.support.clone();
            protected.extend(support_of(cfg));
            let next = std::slice::from_ref(&vars[l.values.len()]);
            return canonical_valuations(next, &b, &protected, &tri.constraint)
                .into_iter()
                .map(|val| {
                    let mut t = cfg.tape.cells.clone();
                    t.push(AtomTerm::Atom(val[&next[0]]));
                    let head = t.len() - 1;
                    (AtomTerm::tau(), Configuration { state: c("valuate"), tape: Tape::new(t, head) })
                })
                .collect();
        }
        let Some(label) = self.produce_label(code, &b) else { return Vec::new() };
        let mut t = cfg.tape.cells.clone();
        t.push(label_cell(label));
        let head = t.len() - 1;
        vec![(AtomTerm::tau(), Configuration { state: c("fire"), tape: Tape::new(t, head) })]
    }

    fn produce_label(&self, code: &SetBuilderCode, b: &Binding) -> Option<AtomTerm> {
        let d = match project(code, Component::Action).and_then(|p| decode(&p)) {
            Ok(mut ds) if ds.len() == 1 => ds.remove(0),
            _ => {
                self.fail(format!("cannot project the action of {code}"));
                return None;
            }
        };
        self.labels.lock().expect("label log").insert(d.clone());
        let gadget = emit_gadget(&GadgetKind::ProduceLabel(OrbitSet::new(self.source.support.clone(), vec![d.clone()])));
        let mut cells = vec![encode(std::slice::from_ref(&d)).to_term()];
        cells.extend(d.pattern.vars().iter().map(|v| AtomTerm::Atom(b[v])));
        let n = cells.len();
        let (actions, end) = run_gadget(&gadget, Configuration { state: c("start"), tape: Tape::new(cells, 0) }, 8 * n * n + 8);
        // The step into 'finish fires the label; every earlier step is silent.
        match actions.split_last() {
            Some((a, init)) if end.state == c("finish") && init.iter().all(AtomTerm::is_tau) => Some(a.clone()),
            _ => {
                self.fail(format!("label program for {d} did not fire exactly once"));
                None
            }
        }
    }

    fn fire(&self, l: &Layout) -> Vec<(AtomTerm, Configuration)> {
        let (Some((_, tri)), Some(label)) = (&l.triple, &l.label) else { return Vec::new() };
        let b: Binding = tri.vars().into_iter().zip(l.values.iter().copied()).collect();
        let back = (AtomTerm::tau(), Configuration { state: c("enumerate"), tape: layout_tape(&l.state_code, &l.abar, &[]) });
        let Ok(t) = tri.target.instantiate(&b) else {
            self.fail(format!("target of `{}` has unvalued variables", tri.as_descriptor()));
            return vec![back];
        };
        let (tc, tbar) = encode_state(&t, &self.source.support);
        let fired = (label.clone(), Configuration { state: c("enumerate"), tape: layout_tape(&tc, &tbar, &[]) });
        vec![fired, back]
    }
}

impl AtomMachine for CompiledRtmA {
    fn support(&self) -> &AtomSet {
        &self.source.support
    }

    fn initial_configuration(&self) -> Configuration {
        Configuration::initial(c("up"))
    }

    fn step(&self, cfg: &Configuration) -> Vec<(AtomTerm, Configuration)> {
        if cfg.state == c("up") {
            if !cfg.tape.read().is_blank() {
                return Vec::new();
            }
            let (code, abar) = &self.source.initial;
            let t = layout_tape(code, abar, &[]);
            return vec![(AtomTerm::tau(), Configuration { state: c("enumerate"), tape: t })];
        }
        let Some(l) = read_layout(&cfg.tape) else { return Vec::new() };
        match &cfg.state {
            s if *s == c("enumerate") => self.enumerate(&l, &cfg.tape),
            s if *s == c("generate") => self.generate(&l),
            s if *s == c("valuate") => self.valuate(&l, cfg),
            s if *s == c("fire") => self.fire(&l),
            _ => Vec::new(),
        }
    }
}

/// Which equivalence a round trip is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Bb,
    Dpbb,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Bb => "bb",
            Mode::Dpbb => "dpbb",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bb" => Ok(Mode::Bb),
            "dpbb" => Ok(Mode::Dpbb),
            _ => Err(format!("unknown mode `{s}` (expected bb or dpbb)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Related,
    NotRelated(String),
    /// Some graph did not close within the depth; never a failure verdict.
    Inconclusive(String),
}

impl Verdict {
    pub fn is_related(&self) -> bool {
        matches!(self, Verdict::Related)
    }
}

/// Outcome of a round trip, printed as `key: value` lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompilationReport {
    pub source: String,
    pub machine: String,
    pub mode: Mode,
    pub depth: usize,
    pub source_states: usize,
    pub machine_states: usize,
    pub truncated: bool,
    pub verdict: Verdict,
}

impl fmt::Display for CompilationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "source: {}", self.source)?;
        writeln!(f, "machine: {}", self.machine)?;
        writeln!(f, "mode: {}", self.mode)?;
        writeln!(f, "depth: {}", self.depth)?;
        writeln!(f, "source-states: {}", self.source_states)?;
        writeln!(f, "machine-states: {}", self.machine_states)?;
        writeln!(f, "truncated: {}", if self.truncated { "yes" } else { "no" })?;
        match &self.verdict {
            Verdict::Related => writeln!(f, "verdict: related"),
            Verdict::NotRelated(why) => writeln!(f, "verdict: not related\nreason: {why}"),
            Verdict::Inconclusive(why) => writeln!(f, "verdict: inconclusive\nreason: {why}"),
        }
    }
}

fn check(l1: &FiniteLts, l2: &FiniteLts, mode: Mode) -> BisimVerdict {
    match mode {
        Mode::Bb => branching_bisim(l1, l2),
        Mode::Dpbb => dp_branching_bisim(l1, l2),
    }
}

/// Compares two explorations; either failing to close makes the outcome inconclusive.
pub fn compare_explorations(source: &Exploration, machine: &Exploration, mode: Mode) -> Verdict {
    let (Some(s), Some(m)) = (source.complete(), machine.complete()) else {
        let which = if source.closed { "machine" } else { "source" };
        return Verdict::Inconclusive(format!("{which} graph does not close within the depth"));
    };
    let v = check(&s, &m, mode);
    if v.related {
        Verdict::Related
    } else {
        Verdict::NotRelated(v.distinction.map(|d| d.to_string()).unwrap_or_default())
    }
}

fn finite_as_exploration(l: &FiniteLts) -> Exploration {
    Exploration { lts: l.clone(), closed: true, frontier: Vec::new(), truncated: false }
}

/// Round trip of a finite source against a classical machine.
pub fn verify_finite(source: &FiniteLts, machine: &Rtm, depth: usize, mode: Mode) -> CompilationReport {
    let m = config_lts(machine, depth);
    let s = finite_as_exploration(source);
    CompilationReport {
        source: format!("finite LTS, {} states, {} transitions", source.num_states(), source.transitions.len()),
        machine: format!("RTM, {} states, {} rules", machine.states().len(), machine.rules.len()),
        mode,
        depth,
        source_states: source.num_states(),
        machine_states: m.lts.num_states(),
        truncated: false,
        verdict: compare_explorations(&s, &m, mode),
    }
}

/// Round trip of an orbit-quotiented source against an infinitary machine.
pub fn verify_inf<L: OrbitQuotient + ?Sized>(source: &L, machine: &RtmInf, depth: usize, budget: usize, mode: Mode) -> CompilationReport {
    let (s, m) = (bounded_reach(source, depth), config_lts_inf(machine, depth, budget));
    let report = |verdict, ss, ms, truncated| CompilationReport {
        source: "orbit quotient of a system with atoms".into(),
        machine: "infinitary RTM with oracle rules".into(),
        mode,
        depth,
        source_states: ss,
        machine_states: ms,
        truncated,
        verdict,
    };
    match (s, m) {
        (Ok(s), Ok(m)) => {
            let (ss, ms, tr) = (s.lts.num_states(), m.lts.num_states(), s.truncated || m.truncated);
            report(compare_explorations(&s, &m, mode), ss, ms, tr)
        }
        (Err(e), _) => report(Verdict::Inconclusive(e.to_string()), 0, 0, false),
        (_, Err(e)) => report(Verdict::Inconclusive(e.to_string()), 0, 0, false),
    }
}

/// Round trip of an orbit-quotiented source against a machine with atoms.
pub fn verify_atoms<L: OrbitQuotient + ?Sized, M: AtomMachine + ?Sized>(
    source: &L,
    machine: &M,
    depth: usize,
    mode: Mode,
) -> CompilationReport {
    let m = config_lts_canonical(machine, depth);
    let mut report = CompilationReport {
        source: format!("system with atoms, support {{{}}}", crate::lts::render_atoms(source.quotient_support()).replace(' ', ", ")),
        machine: "RTM with atoms".into(),
        mode,
        depth,
        source_states: 0,
        machine_states: m.lts.num_states(),
        truncated: m.truncated,
        verdict: Verdict::Inconclusive(String::new()),
    };
    match bounded_reach(source, depth) {
        Ok(s) => {
            report.source_states = s.lts.num_states();
            report.truncated |= s.truncated;
            report.verdict = compare_explorations(&s, &m, mode);
        }
        Err(e) => report.verdict = Verdict::Inconclusive(e.to_string()),
    }
    report
}

/// [`verify_atoms`] for the staged machine, recording its enumerator diagnostics.
pub fn verify_compiled(source: &EffectiveLtsA, machine: &CompiledRtmA, depth: usize, mode: Mode) -> CompilationReport {
    let mut r = verify_atoms(source, machine, depth, mode);
    r.machine = "RTM with atoms, enumerator-backed stages".into();
    r.truncated |= machine.truncated();
    if let Some(f) = machine.failures().first() {
        r.verdict = Verdict::Inconclusive(format!("enumerator failure: {f}"));
    }
    r
}

/// Least atoms outside `k`, used to instantiate representatives.
pub fn representative_atoms(k: &AtomSet, n: usize) -> Vec<Atom> {
    fresh_n(k, n)
}
