//! Independent oracles and seeded generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use nomrtm::atoms::{Atom, AtomSet, AtomTerm, Permutation};
use nomrtm::lts::{parse_ltsa, FiniteLts, SymbolicLtsA};
use nomrtm::pi::{PiProcess, Prefix};
use nomrtm::rtm_atoms::{parse_rtma, RtmA};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ------------------------------------------------------------ naive bisimilarity

/// The disjoint union of two systems as adjacency lists; the right system's
/// states are shifted by the left's size.
struct Union {
    succ: Vec<Vec<(bool, String, usize)>>,
}

impl Union {
    fn new(l1: &FiniteLts, l2: &FiniteLts) -> Union {
        let n1 = l1.names.len();
        let mut succ = vec![Vec::new(); n1 + l2.names.len()];
        for (s, a, t) in &l1.transitions {
            succ[*s].push((a.is_tau(), a.to_string(), *t));
        }
        for (s, a, t) in &l2.transitions {
            succ[n1 + s].push((a.is_tau(), a.to_string(), n1 + t));
        }
        Union { succ }
    }

    fn tau_closure(&self, s: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([s]);
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for (tau, _, y) in &self.succ[x] {
                if *tau && seen.insert(*y) {
                    stack.push(*y);
                }
            }
        }
        seen
    }
}

/// Whether the move `u --a--> u2` is matched from `v` under `r`.
fn matched(g: &Union, r: &BTreeSet<(usize, usize)>, u: usize, tau: bool, label: &str, u2: usize, v: usize) -> bool {
    if tau && r.contains(&(u2, v)) {
        return true;
    }
    g.tau_closure(v).into_iter().any(|v1| {
        r.contains(&(u, v1)) && g.succ[v1].iter().any(|(t2, l2, v2)| *t2 == tau && l2 == label && r.contains(&(u2, *v2)))
    })
}

/// Divergence condition: no infinite τ-path from `u` through states related
/// to `v` none of which is related to a τ-successor of `v`.
fn divergence_ok(g: &Union, r: &BTreeSet<(usize, usize)>, u: usize, v: usize) -> bool {
    let v_next: Vec<usize> = g.succ[v].iter().filter(|(t, _, _)| *t).map(|(_, _, y)| *y).collect();
    let mut bad: BTreeSet<usize> =
        (0..g.succ.len()).filter(|x| r.contains(&(*x, v)) && v_next.iter().all(|t| !r.contains(&(*x, *t)))).collect();
    // Keep only states with a τ-successor inside the set: what remains lies on infinite paths.
    loop {
        let keep: BTreeSet<usize> =
            bad.iter().copied().filter(|x| g.succ[*x].iter().any(|(t, _, y)| *t && bad.contains(y))).collect();
        if keep.len() == bad.len() {
            break;
        }
        bad = keep;
    }
    !bad.contains(&u)
}

/// The greatest (divergence-preserving) branching bisimulation on the
/// disjoint union, computed by deleting violating pairs from the full relation.
pub fn naive_related(l1: &FiniteLts, l2: &FiniteLts, divergence: bool) -> bool {
    let g = Union::new(l1, l2);
    let n = g.succ.len();
    let mut r: BTreeSet<(usize, usize)> = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).collect();
    loop {
        let mut removed = Vec::new();
        for &(u, v) in &r {
            let ok = g.succ[u].iter().all(|(tau, l, u2)| matched(&g, &r, u, *tau, l, *u2, v))
                && (!divergence || divergence_ok(&g, &r, u, v));
            if !ok {
                removed.push((u, v));
            }
        }
        if removed.is_empty() {
            break;
        }
        for (u, v) in removed {
            r.remove(&(u, v));
            r.remove(&(v, u));
        }
    }
    r.contains(&(l1.initial, l1.names.len() + l2.initial))
}

// ------------------------------------------------------------ finite systems

const LABELS: [&str; 4] = ["tau", "a", "b", "c"];

pub fn label(s: &str) -> AtomTerm {
    nomrtm::lts::label_from_text(s)
}

pub fn random_lts(rng: &mut ChaCha8Rng, max_states: usize, max_labels: usize, max_trans: usize) -> FiniteLts {
    let n = rng.random_range(1..=max_states);
    let labels = &LABELS[..rng.random_range(1..=max_labels)];
    let m = rng.random_range(0..=max_trans.min(n * n * labels.len()));
    let mut trans = BTreeSet::new();
    for _ in 0..m {
        trans.insert((rng.random_range(0..n), *labels.choose(rng).unwrap(), rng.random_range(0..n)));
    }
    FiniteLts::new(n, trans.into_iter().map(|(s, a, t)| (s, label(a), t)).collect(), 0)
}

/// A variant of `l`: an inert τ-step inserted, a state split into two copies,
/// or one extra transition, the last usually breaking bisimilarity.
pub fn perturbed(rng: &mut ChaCha8Rng, l: &FiniteLts) -> FiniteLts {
    let n = l.num_states();
    let mut trans = l.transitions.clone();
    let mut states = n;
    match rng.random_range(0..3) {
        0 if !trans.is_empty() => {
            // s --a--> t becomes s --tau--> m --a--> t, with m copying s's other moves.
            let i = rng.random_range(0..trans.len());
            let (s, a, t) = trans.remove(i);
            let m = states;
            states += 1;
            trans.push((s, label("tau"), m));
            trans.push((m, a.clone(), t));
            for (s2, a2, t2) in l.transitions.clone() {
                if s2 == s {
                    trans.push((m, a2, t2));
                }
            }
        }
        1 => {
            // Duplicate a state: its incoming edges are split between the copies.
            let s = rng.random_range(0..n);
            let c = states;
            states += 1;
            let outs: Vec<_> = trans.iter().filter(|(x, _, _)| *x == s).cloned().collect();
            for (_, a, t) in outs {
                trans.push((c, a, if t == s { c } else { t }));
            }
            for e in trans.iter_mut() {
                if e.2 == s && e.0 != c && rng.random_bool(0.5) {
                    e.2 = c;
                }
            }
        }
        _ => {
            let i = rng.random_range(0..LABELS.len());
            trans.push((rng.random_range(0..n), label(LABELS[i]), rng.random_range(0..n)));
        }
    }
    let mut set: Vec<_> = trans.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    set.sort();
    FiniteLts::new(states, set, l.initial)
}

// ------------------------------------------------------------ symbolic systems

fn vars(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn tuple_text(head: &str, args: &[String]) -> String {
    if args.is_empty() {
        head.to_string()
    } else {
        format!("({head},{})", args.join(","))
    }
}

fn distinct(vars: &[String], k: &AtomSet) -> String {
    let mut lits = Vec::new();
    for (i, x) in vars.iter().enumerate() {
        for y in &vars[i + 1..] {
            lits.push(format!("{x} != {y}"));
        }
        for a in k {
            lits.push(format!("{x} != {a}"));
        }
    }
    if lits.is_empty() {
        String::new()
    } else {
        format!(" where {}", lits.join(", "))
    }
}

/// At most four single-orbit state descriptors `('q<i>, x…)` with pairwise
/// distinct non-support arguments, and at most six transition descriptors
/// with at most two new atoms each.
pub fn random_symbolic(rng: &mut ChaCha8Rng) -> SymbolicLtsA {
    let k: AtomSet = if rng.random_bool(0.5) { AtomSet::from([Atom(0)]) } else { AtomSet::new() };
    let n_orbits = rng.random_range(1..=4);
    let arity: Vec<usize> = (0..n_orbits).map(|i| if i == 0 { 0 } else { rng.random_range(0..=2) }).collect();
    let mut text = format!(
        "support:{}\ninitial: 'q0\nstates:\n",
        k.iter().map(|a| format!(" {a}")).collect::<String>()
    );
    for (i, &n) in arity.iter().enumerate() {
        let xs = vars("x", n);
        text.push_str(&format!("orbit {}{}\n", tuple_text(&format!("'q{i}"), &xs), distinct(&xs, &k)));
    }
    text.push_str("transitions:\n");
    let n_trans = rng.random_range(1..=6);
    // Sources are drawn from orbits already targeted, so most descriptors are reachable.
    let mut reached = vec![0usize];
    for _ in 0..n_trans {
        let (i, j) = (*reached.choose(rng).unwrap(), rng.random_range(0..n_orbits));
        let src = vars("x", arity[i]);
        let n_new = rng.random_range(0..=2usize);
        let new = vars("y", n_new);
        let pool: Vec<String> = src.iter().chain(new.iter()).cloned().collect();
        // Target arguments: an injective pick from the source and new variables.
        let mut shuffled = pool.clone();
        for idx in (1..shuffled.len()).rev() {
            let r = rng.random_range(0..=idx);
            shuffled.swap(idx, r);
        }
        if shuffled.len() < arity[j] {
            continue;
        }
        let tgt: Vec<String> = shuffled[..arity[j]].to_vec();
        if !reached.contains(&j) {
            reached.push(j);
        }
        let act = match rng.random_range(0..4) {
            0 => "'tau".to_string(),
            1 => ["'a", "'b"].choose(rng).unwrap().to_string(),
            2 if !pool.is_empty() => pool.choose(rng).unwrap().clone(),
            _ if !k.is_empty() && !pool.is_empty() => format!("(#0,{})", pool.choose(rng).unwrap()),
            _ => "'c".to_string(),
        };
        // New variables that occur nowhere would only duplicate transitions.
        let used: Vec<String> = pool
            .iter()
            .filter(|v| src.contains(v) || tgt.contains(v) || act.contains(v.as_str()))
            .cloned()
            .collect();
        text.push_str(&format!(
            "orbit ({},{},{}){}\n",
            tuple_text(&format!("'q{i}"), &src),
            act,
            tuple_text(&format!("'q{j}"), &tgt),
            distinct(&used, &k)
        ));
    }
    parse_ltsa(&text).unwrap_or_else(|e| panic!("generated system does not parse: {e}\n{text}"))
}

// ------------------------------------------------------------ machines with atoms

/// Control levels `'p0..'p3` and `('p<i>,x)`; variables written but not read
/// only in schemas moving to a strictly higher level, which bounds the
/// number of fresh atoms a run can draw.
pub fn random_rtma(rng: &mut ChaCha8Rng) -> RtmA {
    let k: AtomSet = if rng.random_bool(0.5) { AtomSet::from([Atom(0)]) } else { AtomSet::new() };
    let mut text = format!("support:{}\ninitial: 'p0\n", k.iter().map(|a| format!(" {a}")).collect::<String>());
    let n = rng.random_range(2..=7);
    for _ in 0..n {
        let i = rng.random_range(0..4);
        let src_has = i > 0 && rng.random_bool(0.5);
        let src = if src_has { "('p{i},x)".replace("{i}", &i.to_string()) } else { format!("'p{i}") };
        let read = *["'_", "y", "x", "'_"].choose(rng).unwrap();
        let read = if read == "x" && !src_has { "'_" } else { read };
        let mut bound: Vec<&str> = Vec::new();
        if src_has {
            bound.push("x");
        }
        if read == "y" {
            bound.push("y");
        }
        let up = i < 3 && rng.random_bool(0.6);
        let j = if up { rng.random_range(i + 1..4) } else { rng.random_range(0..=i) };
        // Right-only variable `z` only when moving up.
        let mut avail: Vec<&str> = bound.clone();
        if up {
            avail.push("z");
        }
        let pick = |rng: &mut ChaCha8Rng, avail: &[&str]| -> String { avail.choose(rng).map(|s| s.to_string()).unwrap_or("'_".into()) };
        let action = match rng.random_range(0..3) {
            0 => "'tau".to_string(),
            1 => "'a".to_string(),
            _ => pick(rng, &avail),
        };
        let write = if rng.random_bool(0.5) { "'_".to_string() } else { pick(rng, &avail) };
        let mv = if rng.random_bool(0.5) { "L" } else { "R" };
        let tgt = if j > 0 && rng.random_bool(0.5) && !avail.is_empty() {
            format!("('p{j},{})", pick(rng, &avail))
        } else {
            format!("'p{j}")
        };
        let mut lits = Vec::new();
        if bound.len() == 2 && rng.random_bool(0.5) {
            lits.push("x != y".to_string());
        }
        let all = format!("{src} {read} {action} {write} {tgt}");
        if all.contains('z') && !k.is_empty() && rng.random_bool(0.5) {
            lits.push("z != #0".into());
        }
        let wh = if lits.is_empty() { String::new() } else { format!(" where {}", lits.join(", ")) };
        text.push_str(&format!("schema: {src} {read} {action} {write} {mv} {tgt}{wh}\n"));
    }
    parse_rtma(&text).unwrap_or_else(|e| panic!("generated machine does not parse: {e}\n{text}"))
}

// ------------------------------------------------------------ terms and processes

pub fn random_term(rng: &mut ChaCha8Rng, depth: usize) -> AtomTerm {
    match rng.random_range(0..if depth == 0 { 2 } else { 3 }) {
        0 => AtomTerm::Atom(Atom(rng.random_range(0..6))),
        1 => AtomTerm::constant(*["a", "b", "tau"].choose(rng).unwrap()),
        _ => AtomTerm::Tuple((0..rng.random_range(0..4)).map(|_| random_term(rng, depth - 1)).collect()),
    }
}

pub fn random_permutation(rng: &mut ChaCha8Rng) -> Permutation {
    let mut p = Permutation::identity();
    for _ in 0..rng.random_range(0..4) {
        let (a, b) = (Atom(rng.random_range(0..8)), Atom(rng.random_range(0..8)));
        if a != b {
            p = Permutation::transposition(a, b).compose(&p);
        }
    }
    p
}

pub fn random_process(rng: &mut ChaCha8Rng, depth: usize) -> PiProcess {
    let name = |rng: &mut ChaCha8Rng| Atom(rng.random_range(0..4));
    if depth == 0 {
        return PiProcess::Nil;
    }
    let sub = |rng: &mut ChaCha8Rng| Box::new(random_process(rng, depth - 1));
    match rng.random_range(0..8) {
        0 => PiProcess::Nil,
        1 => PiProcess::Prefix(Prefix::Tau, sub(rng)),
        2 => PiProcess::Prefix(Prefix::Out(name(rng), name(rng)), sub(rng)),
        3 => PiProcess::Prefix(Prefix::In(name(rng), name(rng)), sub(rng)),
        4 => PiProcess::Sum(sub(rng), sub(rng)),
        5 => PiProcess::Par(sub(rng), sub(rng)),
        6 => PiProcess::New(name(rng), sub(rng)),
        _ => PiProcess::Rep(sub(rng)),
    }
}

/// Edge set of a graph keyed by state names, for isomorphism after canonical naming.
pub fn named_edges(l: &FiniteLts) -> (BTreeSet<String>, BTreeSet<(String, String, String)>) {
    let names: BTreeSet<String> = l.names.iter().cloned().collect();
    let edges = l.transitions.iter().map(|(s, a, t)| (l.names[*s].clone(), a.to_string(), l.names[*t].clone())).collect();
    (names, edges)
}

pub fn count_by<T: Ord + Clone>(xs: &[T]) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for x in xs {
        *m.entry(x.clone()).or_insert(0) += 1;
    }
    m
}
