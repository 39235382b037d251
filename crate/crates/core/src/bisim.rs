//! Branching bisimilarity and its divergence-preserving variant on finite
//! systems, by signature refinement over the disjoint union.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::atoms::AtomTerm;
use crate::lts::{label_text, FiniteLts};

/// Pseudo-label recording divergence inside the current block.
const DIV: u32 = u32::MAX;

/// Why the initial states were separated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distinction {
    /// Initial states of the left and right systems.
    pub left: usize,
    pub right: usize,
    /// The unmatched step; `None` stands for divergence.
    pub action: Option<AtomTerm>,
    /// Whether the left side is the one that can perform it.
    pub by_left: bool,
    /// Refinement round in which the split happened, from 1.
    pub round: usize,
}

impl fmt::Display for Distinction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (side, other) = if self.by_left { ("left", "right") } else { ("right", "left") };
        match &self.action {
            Some(a) => write!(
                f,
                "{side} initial state can perform {} into a class the {other} initial state cannot reach (round {})",
                label_text(a),
                self.round
            ),
            None => write!(f, "{side} initial state diverges inside its class, the {other} cannot (round {})", self.round),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BisimVerdict {
    pub related: bool,
    /// Pairs `(s1, s2)` in the same final class; empty unless related.
    pub witness: Vec<(usize, usize)>,
    pub distinction: Option<Distinction>,
}

/// Disjoint union with interned labels; the right system is offset by `n1`.
struct Union {
    n1: usize,
    succ: Vec<Vec<(u32, usize)>>,
    tau: u32,
    labels: Vec<AtomTerm>,
}

impl Union {
    fn new(l1: &FiniteLts, l2: &FiniteLts) -> Union {
        let n1 = l1.num_states();
        let mut ids: HashMap<AtomTerm, u32> = HashMap::new();
        let mut labels = vec![AtomTerm::tau()];
        ids.insert(AtomTerm::tau(), 0);
        let mut succ = vec![Vec::new(); n1 + l2.num_states()];
        for (offset, l) in [(0, l1), (n1, l2)] {
            for (s, a, t) in &l.transitions {
                let id = *ids.entry(a.clone()).or_insert_with(|| {
                    labels.push(a.clone());
                    (labels.len() - 1) as u32
                });
                succ[s + offset].push((id, t + offset));
            }
        }
        for out in &mut succ {
            out.sort_unstable();
            out.dedup();
        }
        Union { n1, succ, tau: 0, labels }
    }

    fn len(&self) -> usize {
        self.succ.len()
    }
}

type Signature = Vec<(u32, usize)>;

/// One refinement round: the branching signature of every state under `block`.
fn signatures(u: &Union, block: &[usize], divergence: bool) -> Vec<Signature> {
    let n = u.len();
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, 0);
    for _ in 0..n {
        g.add_node(());
    }
    let mut self_loop = vec![false; n];
    for s in 0..n {
        for &(a, t) in &u.succ[s] {
            if a == u.tau && block[s] == block[t] {
                if s == t {
                    self_loop[s] = true;
                } else {
                    g.add_edge(NodeIndex::new(s), NodeIndex::new(t), ());
                }
            }
        }
    }
    // Components arrive successors-first, so inert continuations are ready.
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0usize; n];
    for (i, c) in sccs.iter().enumerate() {
        for v in c {
            comp[v.index()] = i;
        }
    }
    let mut comp_sig: Vec<BTreeSet<(u32, usize)>> = Vec::with_capacity(sccs.len());
    for (i, c) in sccs.iter().enumerate() {
        let mut sig = BTreeSet::new();
        let mut diverges = c.len() > 1;
        for v in c {
            let s = v.index();
            diverges |= self_loop[s];
            for &(a, t) in &u.succ[s] {
                if a == u.tau && block[s] == block[t] {
                    let j = comp[t];
                    if j != i {
                        sig.extend(comp_sig[j].iter().copied());
                    }
                } else {
                    sig.insert((a, block[t]));
                }
            }
        }
        if divergence && diverges {
            sig.insert((DIV, block[c[0].index()]));
        }
        comp_sig.push(sig);
    }
    (0..n).map(|s| comp_sig[comp[s]].iter().copied().collect()).collect()
}

fn decide(l1: &FiniteLts, l2: &FiniteLts, divergence: bool) -> BisimVerdict {
    let u = Union::new(l1, l2);
    let (i1, i2) = (l1.initial, u.n1 + l2.initial);
    let mut block = vec![0usize; u.len()];
    let mut count = 1;
    let mut distinction = None;
    for round in 1.. {
        let sigs = signatures(&u, &block, divergence);
        let mut ids: HashMap<(usize, &Signature), usize> = HashMap::new();
        let next: Vec<usize> = (0..u.len())
            .map(|s| {
                let k = ids.len();
                *ids.entry((block[s], &sigs[s])).or_insert(k)
            })
            .collect();
        if distinction.is_none() && next[i1] != next[i2] {
            let (a, b): (BTreeSet<_>, BTreeSet<_>) =
                (sigs[i1].iter().copied().collect(), sigs[i2].iter().copied().collect());
            let (by_left, &(label, _)) = match a.difference(&b).next() {
                Some(x) => (true, x),
                None => (false, b.difference(&a).next().expect("separated states have different signatures")),
            };
            distinction = Some(Distinction {
                left: l1.initial,
                right: l2.initial,
                action: (label != DIV).then(|| u.labels[label as usize].clone()),
                by_left,
                round,
            });
        }
        let new_count = ids.len();
        block = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }
    let related = block[i1] == block[i2];
    let witness = if related {
        let mut w = Vec::new();
        for s1 in 0..u.n1 {
            for s2 in u.n1..u.len() {
                if block[s1] == block[s2] {
                    w.push((s1, s2 - u.n1));
                }
            }
        }
        w
    } else {
        Vec::new()
    };
    BisimVerdict { related, witness, distinction: if related { None } else { distinction } }
}

/// Decides `l1 ↔b l2` between the initial states.
pub fn branching_bisim(l1: &FiniteLts, l2: &FiniteLts) -> BisimVerdict {
    decide(l1, l2, false)
}

/// Decides `l1 ↔Δb l2` between the initial states.
pub fn dp_branching_bisim(l1: &FiniteLts, l2: &FiniteLts) -> BisimVerdict {
    decide(l1, l2, true)
}

/// Per-state τ-successors and the reflexive-transitive τ-closure, computed on demand.
struct TauClosure<'a> {
    succ: &'a [Vec<(AtomTerm, usize)>],
    cache: HashMap<usize, Vec<usize>>,
}

impl<'a> TauClosure<'a> {
    fn new(succ: &'a [Vec<(AtomTerm, usize)>]) -> Self {
        TauClosure { succ, cache: HashMap::new() }
    }

    /// States reachable by zero or more τ-steps, `s` first.
    fn star(&mut self, s: usize) -> &[usize] {
        let succ = self.succ;
        self.cache.entry(s).or_insert_with(|| {
            let mut seen = vec![s];
            let mut set = HashSet::from([s]);
            let mut i = 0;
            while i < seen.len() {
                for (a, t) in &succ[seen[i]] {
                    if a.is_tau() && set.insert(*t) {
                        seen.push(*t);
                    }
                }
                i += 1;
            }
            seen
        })
    }

    /// States reachable by one or more τ-steps.
    fn plus(&mut self, s: usize) -> HashSet<usize> {
        let starts: Vec<usize> = self.succ[s].iter().filter(|(a, _)| a.is_tau()).map(|(_, t)| *t).collect();
        let mut out = HashSet::new();
        for t in starts {
            out.extend(self.star(t).iter().copied());
        }
        out
    }
}

/// One direction of the transfer clauses: every step of `s` (in `sa`) is
/// matched from `t` (in `sb`). `rel(x, y)` relates an `sa` state to an `sb` state.
fn transfer_holds(
    s: usize,
    t: usize,
    sa: &[Vec<(AtomTerm, usize)>],
    sb: &[Vec<(AtomTerm, usize)>],
    closure_b: &mut TauClosure<'_>,
    rel: &dyn Fn(usize, usize) -> bool,
) -> bool {
    let mids: Vec<usize> = closure_b.star(t).iter().copied().filter(|&m| rel(s, m)).collect();
    sa[s].iter().all(|(a, s2)| {
        mids.iter().any(|&m| (a.is_tau() && rel(*s2, m)) || sb[m].iter().any(|(b, t2)| b == a && rel(*s2, *t2)))
    })
}

/// States of `nodes` from which an infinite τ-path stays inside `nodes`.
fn divergent_within(nodes: &HashSet<usize>, succ: &[Vec<(AtomTerm, usize)>]) -> HashSet<usize> {
    let mut alive = nodes.clone();
    loop {
        let dead: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|&u| !succ[u].iter().any(|(a, v)| a.is_tau() && alive.contains(v)))
            .collect();
        if dead.is_empty() {
            return alive;
        }
        for d in dead {
            alive.remove(&d);
        }
    }
}

/// One direction of the divergence clause for all pairs with right component `t`:
/// returns the left states `s` for which some infinite τ-path from `s` stays
/// related to `t` without ever being related to a τ⁺-successor of `t`.
fn divergence_violators(
    t: usize,
    related_to_t: &HashSet<usize>,
    sa: &[Vec<(AtomTerm, usize)>],
    closure_b: &mut TauClosure<'_>,
    rel: &dyn Fn(usize, usize) -> bool,
) -> HashSet<usize> {
    let plus = closure_b.plus(t);
    let bad: HashSet<usize> =
        related_to_t.iter().copied().filter(|&u| !plus.iter().any(|&t2| rel(u, t2))).collect();
    divergent_within(&bad, sa)
}

/// Checks the definition directly: `r` relates states of `l1` to states of
/// `l2`, contains the initial pair, and satisfies the transfer clauses (and
/// the divergence clauses when `divergence` is set).
pub fn check_relation(r: &[(usize, usize)], l1: &FiniteLts, l2: &FiniteLts, divergence: bool) -> bool {
    let rel: HashSet<(usize, usize)> = r.iter().copied().collect();
    if !rel.contains(&(l1.initial, l2.initial)) {
        return false;
    }
    if rel.iter().any(|&(a, b)| a >= l1.num_states() || b >= l2.num_states()) {
        return false;
    }
    let (s1, s2) = (l1.successors(), l2.successors());
    let (mut c1, mut c2) = (TauClosure::new(&s1), TauClosure::new(&s2));
    let fwd = |x: usize, y: usize| rel.contains(&(x, y));
    let bwd = |x: usize, y: usize| rel.contains(&(y, x));
    for &(a, b) in &rel {
        if !transfer_holds(a, b, &s1, &s2, &mut c2, &fwd) || !transfer_holds(b, a, &s2, &s1, &mut c1, &bwd) {
            return false;
        }
    }
    if divergence {
        let mut by_right: HashMap<usize, HashSet<usize>> = HashMap::new();
        let mut by_left: HashMap<usize, HashSet<usize>> = HashMap::new();
        for &(a, b) in &rel {
            by_right.entry(b).or_default().insert(a);
            by_left.entry(a).or_default().insert(b);
        }
        for (t, lefts) in &by_right {
            let bad = divergence_violators(*t, lefts, &s1, &mut c2, &fwd);
            if !bad.is_disjoint(lefts) {
                return false;
            }
        }
        for (t, rights) in &by_left {
            let bad = divergence_violators(*t, rights, &s2, &mut c1, &bwd);
            if !bad.is_disjoint(rights) {
                return false;
            }
        }
    }
    true
}
