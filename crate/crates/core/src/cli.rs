//! The `nomrtm` command line. [`run`] takes the argument vector and two
//! output streams and returns the exit code: 0 for success or a positive
//! verdict, 1 for a negative or inconclusive verdict, 2 for usage, IO and
//! parse errors.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::atoms::{Atom, AtomSet, AtomTerm};
use crate::bisim::{branching_bisim, dp_branching_bisim};
use crate::compilers::{
    compile_lts_to_rtminf, compile_ltsa_to_rtma, verify_compiled, verify_finite, CompilationReport, Mode, Verdict,
};
use crate::lts::{
    bounded_reach, check_k_supported, emit_aut, emit_dot, parse_aut, parse_ltsa, EffectiveLtsA, Exploration, SymbolicLtsA,
};
use crate::orbitsets::{member, support_violation, OrbitSet};
use crate::pi::{effective_ltsa_of, free_names, parse_pi_named, pretty_named, transition_sample};
use crate::rtm::{config_lts, emit_rtm, parse_rtm, Configuration, Tape};
use crate::rtm_atoms::{
    config_lts_canonical, emit_gadget, explore_from, parse_rtma, validate_rtma, GadgetKind,
};

#[derive(Debug, Parser)]
#[command(name = "nomrtm", version, about = "Reactive Turing machines with atoms: validation, simulation, compilation and bisimilarity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Aut,
    Dot,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Bb,
    Dpbb,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Bb => Mode::Bb,
            ModeArg::Dpbb => Mode::Dpbb,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a file (.aut, .rtm, .rtma, .ltsa, .pi) and check its well-formedness conditions.
    Validate { file: PathBuf },
    /// Print the reachable graph of a file's system, bounded by depth.
    Lts {
        file: PathBuf,
        #[arg(long, default_value_t = 20)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = Format::Aut)]
        format: Format,
    },
    /// Decide branching bisimilarity of two .aut files (exit 0 related, 1 not related).
    Bisim {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Bb)]
        mode: ModeArg,
    },
    /// Compile a system into a machine.
    #[command(subcommand)]
    Compile(CompileCommand),
    /// π-calculus terms.
    #[command(subcommand)]
    Pi(PiCommand),
    /// Look for a support-fixing transposition that leaves a symbolic system's transition set.
    SupportCheck {
        file: PathBuf,
        #[arg(long, default_value_t = 8)]
        budget: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Scripted demonstrations.
    Demo {
        #[arg(value_enum)]
        which: DemoKind,
    },
}

#[derive(Debug, Subcommand)]
enum CompileCommand {
    /// A finite .aut system into a classical RTM (.rtm).
    RtmInf {
        file: PathBuf,
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 50)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Dpbb)]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A symbolic .ltsa system into an RTM with atoms.
    Rtma {
        file: PathBuf,
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 30)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Bb)]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum PiCommand {
    /// The bounded orbit-quotient graph of a term, as .aut.
    Lts {
        file: PathBuf,
        #[arg(long, default_value_t = 10)]
        depth: usize,
    },
    /// Compile a term's transition system into an RTM with atoms.
    Compile {
        file: PathBuf,
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 25)]
        depth: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DemoKind {
    InfiniteAlphabet,
    Mcrl2Counterexample,
    OddChain,
    Gadgets,
}

/// Failure carrying the exit code 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure(e.to_string())
    }
}

type Outcome = Result<(String, i32), Failure>;

/// Runs the command line; everything printed goes to `out` or `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok((text, code)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Validate { file } => validate(&file),
        Command::Lts { file, depth, format } => lts(&file, depth, format),
        Command::Bisim { left, right, mode } => bisim(&left, &right, mode.into()),
        Command::Compile(CompileCommand::RtmInf { file, verify, depth, mode, out }) => {
            compile_rtm_inf(&file, verify, depth, mode.into(), out.as_deref())
        }
        Command::Compile(CompileCommand::Rtma { file, verify, depth, mode, out }) => {
            let l = parse_ltsa(&read(&file)?)?;
            compile_rtma(EffectiveLtsA::from_symbolic(&l), verify, depth, mode.into(), out.as_deref())
        }
        Command::Pi(PiCommand::Lts { file, depth }) => {
            let (p, _) = parse_pi_named(&read(&file)?)?;
            let e = bounded_reach(&effective_ltsa_of(&p), depth)?;
            Ok((render_exploration(&e, Format::Aut), 0))
        }
        Command::Pi(PiCommand::Compile { file, verify, depth }) => {
            let (p, _) = parse_pi_named(&read(&file)?)?;
            compile_rtma(effective_ltsa_of(&p), verify, depth, Mode::Bb, None)
        }
        Command::SupportCheck { file, budget, depth } => support_check(&file, budget, depth),
        Command::Demo { which } => Ok(match which {
            DemoKind::InfiniteAlphabet => demo_infinite_alphabet(),
            DemoKind::Mcrl2Counterexample => demo_even_numbers(),
            DemoKind::OddChain => demo_odd_chain(),
            DemoKind::Gadgets => demo_gadgets(),
        }),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn extension(path: &Path) -> Result<&str, Failure> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e @ ("aut" | "rtm" | "rtma" | "ltsa" | "pi")) => Ok(e),
        _ => Err(Failure(format!("{}: unknown file kind (expected .aut, .rtm, .rtma, .ltsa or .pi)", path.display()))),
    }
}

fn atoms_text(atoms: &AtomSet) -> String {
    format!("{{{}}}", crate::lts::render_atoms(atoms).replace(' ', ", "))
}

fn validate(file: &Path) -> Outcome {
    let text = read(file)?;
    Ok(match extension(file)? {
        "aut" => {
            let l = parse_aut(&text)?;
            l.validate()?;
            (format!("valid LTS: {} states, {} transitions\n", l.num_states(), l.transitions.len()), 0)
        }
        "rtm" => {
            let m = parse_rtm(&text)?;
            let s = format!(
                "valid RTM: {} control states, {} rules, {} data symbols, {} actions\n",
                m.states().len(),
                m.rules.len(),
                m.data_alphabet().len(),
                m.action_alphabet().len()
            );
            (s, 0)
        }
        "rtma" => {
            let m = parse_rtma(&text)?;
            let v = validate_rtma(&m);
            if v.accepted {
                (format!("valid RTM with atoms: {} schemas, support {}\n", m.schemas.len(), atoms_text(&m.support)), 0)
            } else {
                (v.problems.iter().map(|p| format!("problem: {p}\n")).collect::<String>() + "verdict: rejected\n", 1)
            }
        }
        "ltsa" => {
            let l = parse_ltsa(&text)?;
            let problems = l.validate();
            if problems.is_empty() {
                let s = format!(
                    "valid system with atoms: {} state orbits, {} transition orbits, support {}\n",
                    l.state_space.descriptors.len(),
                    l.transition_space.descriptors.len(),
                    atoms_text(&l.support)
                );
                (s, 0)
            } else {
                (problems.iter().map(|p| format!("problem: {p}\n")).collect::<String>() + "verdict: rejected\n", 1)
            }
        }
        _ => {
            let (p, names) = parse_pi_named(&text)?;
            let fns: Vec<String> = free_names(&p).iter().map(|a| names.get(a).cloned().unwrap_or(a.to_string())).collect();
            (format!("valid π-term: {}\nfree names: {{{}}}\n", pretty_named(&p, &names), fns.join(", ")), 0)
        }
    })
}

fn render_exploration(e: &Exploration, format: Format) -> String {
    let mut s = match format {
        Format::Aut => emit_aut(&e.lts),
        Format::Dot => emit_dot(&e.lts),
    };
    if !e.closed {
        let comment = if matches!(format, Format::Aut) { "--" } else { "//" };
        let _ = writeln!(s, "{comment} not closed within the depth bound");
    }
    s
}

fn lts(file: &Path, depth: usize, format: Format) -> Outcome {
    let text = read(file)?;
    let e = match extension(file)? {
        "aut" => {
            let l = parse_aut(&text)?;
            Exploration { lts: l, closed: true, frontier: Vec::new(), truncated: false }
        }
        "rtm" => config_lts(&parse_rtm(&text)?, depth),
        "rtma" => config_lts_canonical(&parse_rtma(&text)?, depth),
        "ltsa" => bounded_reach(&parse_ltsa(&text)?, depth)?,
        _ => bounded_reach(&effective_ltsa_of(&parse_pi_named(&text)?.0), depth)?,
    };
    Ok((render_exploration(&e, format), 0))
}

fn bisim(left: &Path, right: &Path, mode: Mode) -> Outcome {
    let (l1, l2) = (parse_aut(&read(left)?)?, parse_aut(&read(right)?)?);
    let v = match mode {
        Mode::Bb => branching_bisim(&l1, &l2),
        Mode::Dpbb => dp_branching_bisim(&l1, &l2),
    };
    Ok(if v.related {
        (format!("related ({mode})\nrelation: {} pairs\n", v.witness.len()), 0)
    } else {
        let why = v.distinction.map(|d| format!("distinction: {d}\n")).unwrap_or_default();
        (format!("not related ({mode})\n{why}"), 1)
    })
}

fn report_code(r: &CompilationReport) -> i32 {
    match r.verdict {
        Verdict::Related => 0,
        _ => 1,
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    if let Some(p) = path {
        std::fs::write(p, text).map_err(|e| Failure(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn compile_rtm_inf(file: &Path, verify: bool, depth: usize, mode: Mode, out: Option<&Path>) -> Outcome {
    let src = parse_aut(&read(file)?)?;
    src.validate()?;
    let m = compile_lts_to_rtminf(&src);
    let text = emit_rtm(&m);
    write_out(out, &text)?;
    if !verify {
        return Ok((if out.is_some() { String::new() } else { text }, 0));
    }
    let r = verify_finite(&src, &m, depth, mode);
    Ok((r.to_string(), report_code(&r)))
}

fn compile_rtma(src: EffectiveLtsA, verify: bool, depth: usize, mode: Mode, out: Option<&Path>) -> Outcome {
    let m = compile_ltsa_to_rtma(&src);
    // Exploring populates the label programs the emitted gadget library needs.
    let r = verify_compiled(&src, &m, depth, mode);
    let text = m.emit();
    write_out(out, &text)?;
    if let Some(f) = m.failures().first() {
        return Err(Failure(f.clone()));
    }
    if !verify {
        return Ok((if out.is_some() { String::new() } else { text }, 0));
    }
    Ok((r.to_string(), report_code(&r)))
}

/// Transitions `(s, a, t)` of the states reachable within `depth`, as terms.
fn symbolic_sample(l: &SymbolicLtsA, depth: usize) -> Result<Vec<AtomTerm>, Failure> {
    let e = bounded_reach(l, depth)?;
    let mut sample = Vec::new();
    for name in &e.lts.names {
        let s: AtomTerm = name.parse()?;
        for (a, t) in l.successors(&s) {
            sample.push(AtomTerm::Tuple(vec![s.clone(), a, t]));
        }
    }
    Ok(sample)
}

fn support_check(file: &Path, budget: usize, depth: usize) -> Outcome {
    let text = read(file)?;
    let mut s = String::new();
    let (sample, k, membership): (Vec<AtomTerm>, AtomSet, Box<dyn Fn(&AtomTerm) -> bool>) = match extension(file)? {
        "ltsa" => {
            let l = parse_ltsa(&text)?;
            let sv = check_k_supported(&l);
            if !sv.accepted {
                let _ = writeln!(s, "atoms {} occur outside the declared support", atoms_text(&sv.offending));
                return Ok((s + "verdict: not supported by the declared support\n", 1));
            }
            let sample = symbolic_sample(&l, depth)?;
            let space: OrbitSet = l.transition_space.clone();
            (sample, l.support.clone(), Box::new(move |t| member(t, &space)))
        }
        "pi" => {
            let (p, _) = parse_pi_named(&text)?;
            (transition_sample(&p, depth), free_names(&p), Box::new(crate::pi::is_transition_term))
        }
        _ => return Err(Failure(format!("{}: support-check reads .ltsa or .pi files", file.display()))),
    };
    let _ = writeln!(s, "support: {}", atoms_text(&k));
    let _ = writeln!(s, "sampled transitions: {}", sample.len());
    let _ = writeln!(s, "candidate budget: {budget}");
    Ok(match support_violation(&sample, membership.as_ref(), &k, budget) {
        Some((p, t)) => {
            let moved = crate::atoms::apply(&p, &t);
            let _ = writeln!(s, "certificate: {p} maps {t} to {moved}, which is not a transition");
            (s + "verdict: not supported\n", 1)
        }
        None => (s + "verdict: no violation found within the budget\n", 0),
    })
}

/// Families of transitions without a finite support, with naturals read as atoms.
pub mod families {
    use crate::atoms::{Atom, AtomTerm};

    /// `('up, #2n, 'down)` for `n < count`.
    pub fn even_labels(count: u32) -> Vec<AtomTerm> {
        (0..count).map(|n| even_label(2 * n)).collect()
    }

    fn even_label(n: u32) -> AtomTerm {
        AtomTerm::Tuple(vec![AtomTerm::constant("up"), AtomTerm::Atom(Atom(n)), AtomTerm::constant("down")])
    }

    pub fn is_even_label(t: &AtomTerm) -> bool {
        match t {
            AtomTerm::Tuple(ts) if ts.len() == 3 => match ts[1] {
                AtomTerm::Atom(Atom(n)) if n % 2 == 0 => *t == even_label(n),
                _ => false,
            },
            _ => false,
        }
    }

    fn chain_state(n: u32) -> AtomTerm {
        AtomTerm::Tuple(vec![AtomTerm::constant("s"), AtomTerm::Atom(Atom(n))])
    }

    fn chain_step(n: u32) -> AtomTerm {
        AtomTerm::Tuple(vec![chain_state(n), AtomTerm::Atom(Atom(n)), chain_state(n + 2)])
    }

    /// `(('s,#n), #n, ('s,#n+2))` for the first `count` odd `n`.
    pub fn odd_chain(count: u32) -> Vec<AtomTerm> {
        (0..count).map(|i| chain_step(2 * i + 1)).collect()
    }

    pub fn is_odd_chain_step(t: &AtomTerm) -> bool {
        match t {
            AtomTerm::Tuple(ts) if ts.len() == 3 => match ts[1] {
                AtomTerm::Atom(Atom(n)) if n % 2 == 1 => *t == chain_step(n),
                _ => false,
            },
            _ => false,
        }
    }
}

fn subsets_up_to(atoms: &[Atom], size: usize) -> Vec<AtomSet> {
    let mut out = vec![AtomSet::new()];
    for &a in atoms {
        let more: Vec<AtomSet> = out
            .iter()
            .filter(|s| s.len() < size)
            .map(|s| {
                let mut s2 = s.clone();
                s2.insert(a);
                s2
            })
            .collect();
        out.extend(more);
    }
    out
}

/// Runs the certificate search against every candidate support of at most
/// five sampled atoms; returns the transcript and whether all were refuted.
fn refute_all(sample: &[AtomTerm], membership: &dyn Fn(&AtomTerm) -> bool, s: &mut String) -> bool {
    let atoms: Vec<Atom> = crate::atoms::support_of(&sample.to_vec()).into_iter().collect();
    let candidates = subsets_up_to(&atoms, 5);
    let mut refuted = 0;
    for (i, k) in candidates.iter().enumerate() {
        if let Some((p, t)) = support_violation(sample, membership, k, 8) {
            refuted += 1;
            if i < 3 {
                let _ = writeln!(s, "  K = {}: {p} maps {t} to {}", atoms_text(k), crate::atoms::apply(&p, &t));
            }
        } else {
            let _ = writeln!(s, "  K = {}: no certificate", atoms_text(k));
        }
    }
    let _ = writeln!(s, "  ...");
    let _ = writeln!(s, "candidate supports (subsets of the sample atoms, at most 5 atoms): {}", candidates.len());
    let _ = writeln!(s, "refuted: {refuted} of {}", candidates.len());
    refuted == candidates.len()
}

fn demo_even_numbers() -> (String, i32) {
    let mut s = String::new();
    let _ = writeln!(s, "family: ('up, 2n, 'down) for every natural n, with n read as the atom #n");
    let sample = families::even_labels(8);
    let _ = writeln!(s, "sample: {}", sample.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" "));
    let _ = writeln!(
        s,
        "the family picks out the even atoms, so any finite K leaves some even atom free to be swapped with an odd one"
    );
    let _ = writeln!(s, "certificates:");
    let all = refute_all(&sample, &families::is_even_label, &mut s);
    let _ = writeln!(s, "verdict: {}", if all { "not nominally executable" } else { "undecided within the budget" });
    let _ = writeln!(s, "(a bounded search witnesses the failure on these candidates; it does not prove it for all K)");
    (s, if all { 0 } else { 1 })
}

fn demo_odd_chain() -> (String, i32) {
    let mut s = String::new();
    let _ = writeln!(s, "family: ('s,n) --n--> ('s,n+2) for every odd n, with n read as the atom #n");
    let sample = families::odd_chain(8);
    let _ = writeln!(s, "sample: {}", sample.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" "));
    let _ = writeln!(s, "each step fixes the atom two above its label, so no finite K makes the set closed under K-fixing swaps");
    let _ = writeln!(s, "certificates:");
    let all = refute_all(&sample, &families::is_odd_chain_step, &mut s);
    let _ = writeln!(s, "verdict: {}", if all { "not a legal set with atoms" } else { "undecided within the budget" });
    (s, if all { 0 } else { 1 })
}

const INFINITE_ALPHABET: &str = "support:
initial: 'up
states:
orbit 'up
orbit ('s,x)
orbit 'down
transitions:
orbit ('up,x,('s,x))
orbit (('s,x),x,'down)
";

fn demo_infinite_alphabet() -> (String, i32) {
    let mut s = String::new();
    let _ = writeln!(s, "system: read any atom x, then emit x again");
    s.push_str(INFINITE_ALPHABET);
    let l = parse_ltsa(INFINITE_ALPHABET).expect("demo system parses");
    let e = bounded_reach(&l, 10).expect("demo system explores");
    let _ = writeln!(s, "orbit quotient: {} states, {} transitions", e.lts.num_states(), e.lts.transitions.len());
    s.push_str(&emit_aut(&e.lts));
    let _ = writeln!(
        s,
        "argument: the first step can carry any of infinitely many atoms and the second must repeat it. A classical \
         machine has finitely many (state, symbol) pairs to react on, so two different atoms end in the same pair and \
         their continuations cannot differ. This is argued, not checked."
    );
    let src = EffectiveLtsA::from_symbolic(&l);
    let m = compile_ltsa_to_rtma(&src);
    let r = verify_compiled(&src, &m, 30, Mode::Bb);
    let _ = writeln!(s, "compiled to an RTM with atoms:");
    s.push_str(&r.to_string());
    let code = report_code(&r);
    (s, code)
}

fn tape(cells: &[&str], head: usize) -> Tape {
    Tape::new(cells.iter().map(|c| c.parse().expect("demo cell")).collect(), head)
}

fn demo_gadgets() -> (String, i32) {
    let mut s = String::new();
    let mut ok = true;

    let copy = emit_gadget(&GadgetKind::Copy);
    let start = Configuration { state: AtomTerm::constant("copy"), tape: tape(&["#1", "#2"], 0) };
    let _ = writeln!(s, "copy gadget from {start}:");
    let mut cur = start.clone();
    loop {
        let next = crate::rtm_atoms::step_canonical(&copy, &cur);
        let [(a, n)] = next.as_slice() else { break };
        let _ = writeln!(s, "  --{a}--> {n}");
        cur = n.clone();
    }
    let written: Vec<&AtomTerm> = cur.tape.cells.iter().filter(|c| !c.is_blank()).collect();
    ok &= cur.state == AtomTerm::constant("finish") && written.len() == 3 && written[2] == written[0];

    let fresh = emit_gadget(&GadgetKind::Fresh);
    let start = Configuration { state: AtomTerm::constant("fresh"), tape: tape(&["#0", "#1", "'_"], 2) };
    let e = explore_from(&fresh, &start, 40);
    let finals: Vec<&String> = e.lts.names.iter().filter(|n| n.contains("'finish")).collect();
    let _ = writeln!(s, "fresh gadget from {start}:");
    let _ = writeln!(s, "  {} canonical configurations, closed: {}", e.lts.num_states(), e.closed);
    for f in &finals {
        let _ = writeln!(s, "  terminal: {f}");
    }
    ok &= finals.len() == 1;

    let d: crate::orbitsets::OrbitDescriptor = "orbit (x,y) where x != y".parse().expect("demo descriptor");
    let labels = OrbitSet::new(AtomSet::new(), vec![d.clone()]);
    let mut gadget = emit_gadget(&GadgetKind::ProduceLabel(labels.clone()));
    gadget.support = [Atom(3), Atom(4)].into();
    let code = crate::orbitsets::encode(&labels.descriptors).to_term().to_string();
    let start = Configuration { state: AtomTerm::constant("start"), tape: tape(&[&code, "#3", "#4"], 0) };
    let e = explore_from(&gadget, &start, 40);
    let visible: Vec<String> = e.lts.transitions.iter().filter(|(_, a, _)| !a.is_tau()).map(|(_, a, _)| a.to_string()).collect();
    let _ = writeln!(s, "label program for `{d}` on the tuple #3 #4:");
    let _ = writeln!(s, "  {} canonical configurations, visible labels: {}", e.lts.num_states(), visible.join(" "));
    ok &= visible.len() == 1;
    let _ = writeln!(s, "verdict: {}", if ok { "all gadgets behave as specified" } else { "gadget misbehaviour" });
    (s, if ok { 0 } else { 1 })
}
