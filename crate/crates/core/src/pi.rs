//! π-calculus front end: terms whose names are atoms, α-canonical forms, the
//! structural operational semantics, and the transition system of a term.
//!
//! Transitions are derived in late style internally: an input carries a
//! placeholder for its object, instantiated at the top level. Every binder
//! fired by a rule is first renamed to an atom drawn from a supply above all
//! atoms in play, so the freshness side conditions of the parallel,
//! restriction and close rules hold without further renaming.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::atoms::{fresh, fresh_n, parse_atom, Atom, AtomSet, AtomTerm, Nominal};
use crate::lts::{EffectiveLtsA, LtsError};
use crate::syntax::{is_ident_char, is_ident_start, Cursor, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prefix {
    Tau,
    /// `x<y>`
    Out(Atom, Atom),
    /// `x(y)`, binding `y`.
    In(Atom, Atom),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PiProcess {
    Nil,
    Prefix(Prefix, Box<PiProcess>),
    Sum(Box<PiProcess>, Box<PiProcess>),
    Par(Box<PiProcess>, Box<PiProcess>),
    New(Atom, Box<PiProcess>),
    Rep(Box<PiProcess>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PiAction {
    Tau,
    Out(Atom, Atom),
    In(Atom, Atom),
    /// Bound output `x(z)`: `z` is extruded.
    BoundOut(Atom, Atom),
}

use PiProcess::*;

fn bx(p: PiProcess) -> Box<PiProcess> {
    Box::new(p)
}

pub fn par(p: PiProcess, q: PiProcess) -> PiProcess {
    Par(bx(p), bx(q))
}

pub fn new(z: Atom, p: PiProcess) -> PiProcess {
    New(z, bx(p))
}

impl PiAction {
    pub fn bound_names(&self) -> AtomSet {
        match self {
            PiAction::BoundOut(_, z) => AtomSet::from([*z]),
            _ => AtomSet::new(),
        }
    }

    /// Labels are `'tau`, `('out,x,y)`, `('in,x,y)` and `('bout,x,z)`.
    pub fn to_term(&self) -> AtomTerm {
        let t = |tag: &str, x: &Atom, y: &Atom| AtomTerm::Tuple(vec![AtomTerm::constant(tag), AtomTerm::Atom(*x), AtomTerm::Atom(*y)]);
        match self {
            PiAction::Tau => AtomTerm::tau(),
            PiAction::Out(x, y) => t("out", x, y),
            PiAction::In(x, y) => t("in", x, y),
            PiAction::BoundOut(x, z) => t("bout", x, z),
        }
    }

    pub fn from_term(t: &AtomTerm) -> Option<PiAction> {
        if t.is_tau() {
            return Some(PiAction::Tau);
        }
        let AtomTerm::Tuple(parts) = t else { return None };
        let [AtomTerm::Const(tag), x, y] = parts.as_slice() else { return None };
        let (x, y) = (x.as_atom()?, y.as_atom()?);
        match tag.as_str() {
            "out" => Some(PiAction::Out(x, y)),
            "in" => Some(PiAction::In(x, y)),
            "bout" => Some(PiAction::BoundOut(x, y)),
            _ => None,
        }
    }
}

impl fmt::Display for PiAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PiAction::Tau => f.write_str("tau"),
            PiAction::Out(x, y) => write!(f, "{x}<{y}>"),
            PiAction::In(x, y) => write!(f, "{x}{y}"),
            PiAction::BoundOut(x, z) => write!(f, "{x}<({z})>"),
        }
    }
}

impl Nominal for PiProcess {
    fn visit_atoms(&self, f: &mut dyn FnMut(Atom)) {
        match self {
            Nil => {}
            Prefix(pre, p) => {
                match pre {
                    Prefix::Tau => {}
                    Prefix::Out(x, y) | Prefix::In(x, y) => {
                        f(*x);
                        f(*y);
                    }
                }
                p.visit_atoms(f)
            }
            Sum(p, q) | Par(p, q) => {
                p.visit_atoms(f);
                q.visit_atoms(f)
            }
            New(z, p) => {
                f(*z);
                p.visit_atoms(f)
            }
            Rep(p) => p.visit_atoms(f),
        }
    }

    fn rename_atoms(&self, f: &mut dyn FnMut(Atom) -> Atom) -> Self {
        match self {
            Nil => Nil,
            Prefix(pre, p) => {
                let pre = match pre {
                    Prefix::Tau => Prefix::Tau,
                    Prefix::Out(x, y) => Prefix::Out(f(*x), f(*y)),
                    Prefix::In(x, y) => Prefix::In(f(*x), f(*y)),
                };
                Prefix(pre, bx(p.rename_atoms(f)))
            }
            Sum(p, q) => Sum(bx(p.rename_atoms(f)), bx(q.rename_atoms(f))),
            Par(p, q) => Par(bx(p.rename_atoms(f)), bx(q.rename_atoms(f))),
            New(z, p) => New(f(*z), bx(p.rename_atoms(f))),
            Rep(p) => Rep(bx(p.rename_atoms(f))),
        }
    }
}

impl Nominal for PiAction {
    fn visit_atoms(&self, f: &mut dyn FnMut(Atom)) {
        match self {
            PiAction::Tau => {}
            PiAction::Out(x, y) | PiAction::In(x, y) | PiAction::BoundOut(x, y) => {
                f(*x);
                f(*y)
            }
        }
    }

    fn rename_atoms(&self, f: &mut dyn FnMut(Atom) -> Atom) -> Self {
        match self {
            PiAction::Tau => PiAction::Tau,
            PiAction::Out(x, y) => PiAction::Out(f(*x), f(*y)),
            PiAction::In(x, y) => PiAction::In(f(*x), f(*y)),
            PiAction::BoundOut(x, y) => PiAction::BoundOut(f(*x), f(*y)),
        }
    }
}

pub fn free_names(p: &PiProcess) -> AtomSet {
    match p {
        Nil => AtomSet::new(),
        Prefix(Prefix::Tau, p) => free_names(p),
        Prefix(Prefix::Out(x, y), p) => {
            let mut s = free_names(p);
            s.extend([*x, *y]);
            s
        }
        Prefix(Prefix::In(x, y), p) => {
            let mut s = free_names(p);
            s.remove(y);
            s.insert(*x);
            s
        }
        Sum(p, q) | Par(p, q) => {
            let mut s = free_names(p);
            s.extend(free_names(q));
            s
        }
        New(z, p) => {
            let mut s = free_names(p);
            s.remove(z);
            s
        }
        Rep(p) => free_names(p),
    }
}

fn all_atoms(p: &PiProcess) -> AtomSet {
    crate::atoms::support_of(p)
}

fn binder_count(p: &PiProcess) -> usize {
    match p {
        Nil => 0,
        Prefix(Prefix::In(..), p) | New(_, p) => 1 + binder_count(p),
        Prefix(_, p) | Rep(p) => binder_count(p),
        Sum(p, q) | Par(p, q) => binder_count(p) + binder_count(q),
    }
}

/// Capture-avoiding substitution `p{to/from}`.
pub fn substitute(p: &PiProcess, from: Atom, to: Atom) -> PiProcess {
    if from == to {
        return p.clone();
    }
    let s = |a: Atom| if a == from { to } else { a };
    // A binder `b` over body `q`: stops at `from`, is renamed away from `to`.
    let under = |b: Atom, q: &PiProcess| -> (Atom, PiProcess) {
        if b == from {
            (b, q.clone())
        } else if b == to {
            let mut avoid = all_atoms(q);
            avoid.extend([from, to]);
            let b2 = fresh(&avoid);
            (b2, substitute(&substitute(q, b, b2), from, to))
        } else {
            (b, substitute(q, from, to))
        }
    };
    match p {
        Nil => Nil,
        Prefix(Prefix::Tau, q) => Prefix(Prefix::Tau, bx(substitute(q, from, to))),
        Prefix(Prefix::Out(x, y), q) => Prefix(Prefix::Out(s(*x), s(*y)), bx(substitute(q, from, to))),
        Prefix(Prefix::In(x, y), q) => {
            let (y2, q2) = under(*y, q);
            Prefix(Prefix::In(s(*x), y2), bx(q2))
        }
        Sum(a, b) => Sum(bx(substitute(a, from, to)), bx(substitute(b, from, to))),
        Par(a, b) => Par(bx(substitute(a, from, to)), bx(substitute(b, from, to))),
        New(z, q) => {
            let (z2, q2) = under(*z, q);
            New(z2, bx(q2))
        }
        Rep(q) => Rep(bx(substitute(q, from, to))),
    }
}

/// Renames the binders, in pre-order, to the least atoms outside `fn(p)`:
/// the i-th binder gets the i-th such atom.
pub fn alpha_canonical(p: &PiProcess) -> PiProcess {
    let fns = free_names(p);
    let pool = fresh_n(&fns, binder_count(p));
    let mut next = 0;
    canon_with(p, &BTreeMap::new(), &pool, &mut next)
}

fn canon_with(p: &PiProcess, env: &BTreeMap<Atom, Atom>, pool: &[Atom], next: &mut usize) -> PiProcess {
    let r = |a: &Atom| *env.get(a).unwrap_or(a);
    let mut bind = |b: &Atom| {
        let mut env2 = env.clone();
        env2.insert(*b, pool[*next]);
        *next += 1;
        (pool[*next - 1], env2)
    };
    match p {
        Nil => Nil,
        Prefix(Prefix::Tau, q) => Prefix(Prefix::Tau, bx(canon_with(q, env, pool, next))),
        Prefix(Prefix::Out(x, y), q) => Prefix(Prefix::Out(r(x), r(y)), bx(canon_with(q, env, pool, next))),
        Prefix(Prefix::In(x, y), q) => {
            let x2 = r(x);
            let (y2, env2) = bind(y);
            Prefix(Prefix::In(x2, y2), bx(canon_with(q, &env2, pool, next)))
        }
        New(z, q) => {
            let (z2, env2) = bind(z);
            New(z2, bx(canon_with(q, &env2, pool, next)))
        }
        Sum(a, b) => {
            let a = canon_with(a, env, pool, next);
            Sum(bx(a), bx(canon_with(b, env, pool, next)))
        }
        Par(a, b) => {
            let a = canon_with(a, env, pool, next);
            Par(bx(a), bx(canon_with(b, env, pool, next)))
        }
        Rep(q) => Rep(bx(canon_with(q, env, pool, next))),
    }
}

pub fn alpha_eq(p: &PiProcess, q: &PiProcess) -> bool {
    alpha_canonical(p) == alpha_canonical(q)
}

// ---------------------------------------------------------------- terms

/// Encodes the α-class of `p` as a term whose atoms are exactly `fn(p)`;
/// the i-th binder becomes the constant `'b<i>`.
pub fn to_term(p: &PiProcess) -> AtomTerm {
    let c = alpha_canonical(p);
    let fns = free_names(&c);
    let pool = fresh_n(&fns, binder_count(&c));
    let bound: BTreeMap<Atom, usize> = pool.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    let name = |a: &Atom| match bound.get(a) {
        Some(i) if !fns.contains(a) => AtomTerm::constant(format!("b{i}")),
        _ => AtomTerm::Atom(*a),
    };
    fn go(p: &PiProcess, name: &dyn Fn(&Atom) -> AtomTerm) -> AtomTerm {
        let k = AtomTerm::constant;
        let t = AtomTerm::Tuple;
        match p {
            Nil => k("nil"),
            Prefix(Prefix::Tau, q) => t(vec![k("tau"), go(q, name)]),
            Prefix(Prefix::Out(x, y), q) => t(vec![k("out"), name(x), name(y), go(q, name)]),
            Prefix(Prefix::In(x, y), q) => t(vec![k("in"), name(x), name(y), go(q, name)]),
            Sum(a, b) => t(vec![k("sum"), go(a, name), go(b, name)]),
            Par(a, b) => t(vec![k("par"), go(a, name), go(b, name)]),
            New(z, q) => t(vec![k("new"), name(z), go(q, name)]),
            Rep(q) => t(vec![k("rep"), go(q, name)]),
        }
    }
    go(&c, &name)
}

/// Inverse of [`to_term`] up to α.
pub fn from_term(t: &AtomTerm) -> Option<PiProcess> {
    let fns = crate::atoms::support_of(t);
    let mut bound = BTreeMap::new();
    let mut n = 0;
    collect_bound(t, &mut n);
    for (i, a) in fresh_n(&fns, n).into_iter().enumerate() {
        bound.insert(format!("b{i}"), a);
    }
    decode_proc(t, &bound)
}

fn collect_bound(t: &AtomTerm, n: &mut usize) {
    match t {
        AtomTerm::Const(s) => {
            if let Some(i) = s.strip_prefix('b').and_then(|d| d.parse::<usize>().ok()) {
                *n = (*n).max(i + 1);
            }
        }
        AtomTerm::Tuple(ts) => ts.iter().for_each(|x| collect_bound(x, n)),
        AtomTerm::Atom(_) => {}
    }
}

fn decode_proc(t: &AtomTerm, bound: &BTreeMap<String, Atom>) -> Option<PiProcess> {
    let name = |x: &AtomTerm| match x {
        AtomTerm::Atom(a) => Some(*a),
        AtomTerm::Const(s) => bound.get(s).copied(),
        _ => None,
    };
    let sub = |x: &AtomTerm| decode_proc(x, bound).map(bx);
    if *t == AtomTerm::constant("nil") {
        return Some(Nil);
    }
    let AtomTerm::Tuple(parts) = t else { return None };
    let AtomTerm::Const(tag) = parts.first()? else { return None };
    Some(match (tag.as_str(), &parts[1..]) {
        ("tau", [q]) => Prefix(Prefix::Tau, sub(q)?),
        ("out", [x, y, q]) => Prefix(Prefix::Out(name(x)?, name(y)?), sub(q)?),
        ("in", [x, y, q]) => Prefix(Prefix::In(name(x)?, name(y)?), sub(q)?),
        ("sum", [a, b]) => Sum(sub(a)?, sub(b)?),
        ("par", [a, b]) => Par(sub(a)?, sub(b)?),
        ("new", [z, q]) => New(name(z)?, sub(q)?),
        ("rep", [q]) => Rep(sub(q)?),
        _ => return None,
    })
}

// ---------------------------------------------------------------- semantics

/// A derived transition with its bound object still symbolic.
#[derive(Debug, Clone)]
enum Late {
    Tau(PiProcess),
    Out(Atom, Atom, PiProcess),
    /// Object is a supply atom free in the residual.
    BoundOut(Atom, Atom, PiProcess),
    /// Input on `x` with placeholder `w` (a supply atom) in the residual.
    In(Atom, Atom, PiProcess),
}

struct Supply(u32);

impl Supply {
    fn above(atoms: &AtomSet) -> Supply {
        Supply(atoms.iter().next_back().map_or(0, |a| a.0 + 1))
    }
    fn next(&mut self) -> Atom {
        self.0 += 1;
        Atom(self.0 - 1)
    }
}

fn wrap(l: Late, f: impl Fn(PiProcess) -> PiProcess) -> Late {
    match l {
        Late::Tau(p) => Late::Tau(f(p)),
        Late::Out(x, y, p) => Late::Out(x, y, f(p)),
        Late::BoundOut(x, z, p) => Late::BoundOut(x, z, f(p)),
        Late::In(x, w, p) => Late::In(x, w, f(p)),
    }
}

/// Communications between an emitter side and a receiver side: COM for free
/// outputs, CLOSE for bound ones. `join` rebuilds the parallel composition.
fn communications(outs: &[Late], ins: &[Late], join: &dyn Fn(PiProcess, PiProcess) -> PiProcess) -> Vec<Late> {
    let mut res = Vec::new();
    for o in outs {
        for i in ins {
            let Late::In(xi, w, q) = i else { continue };
            match o {
                Late::Out(x, y, p) if x == xi => res.push(Late::Tau(join(p.clone(), substitute(q, *w, *y)))),
                Late::BoundOut(x, z, p) if x == xi => {
                    res.push(Late::Tau(New(*z, bx(join(p.clone(), substitute(q, *w, *z))))))
                }
                _ => {}
            }
        }
    }
    res
}

fn late(p: &PiProcess, sup: &mut Supply) -> Vec<Late> {
    match p {
        Nil => Vec::new(),
        Prefix(Prefix::Tau, q) => vec![Late::Tau((**q).clone())],
        Prefix(Prefix::Out(x, y), q) => vec![Late::Out(*x, *y, (**q).clone())],
        Prefix(Prefix::In(x, y), q) => {
            let w = sup.next();
            vec![Late::In(*x, w, substitute(q, *y, w))]
        }
        Sum(a, b) => {
            let mut v = late(a, sup);
            v.extend(late(b, sup));
            v
        }
        Par(a, b) => {
            let (la, lb) = (late(a, sup), late(b, sup));
            let mut v: Vec<Late> = la.iter().cloned().map(|l| wrap(l, |p| par(p, (**b).clone()))).collect();
            v.extend(lb.iter().cloned().map(|l| wrap(l, |q| par((**a).clone(), q))));
            v.extend(communications(&la, &lb, &|p, q| par(p, q)));
            v.extend(communications(&lb, &la, &|q, p| par(p, q)));
            v
        }
        New(z, q) => {
            let g = sup.next();
            let body = substitute(q, *z, g);
            let mut v = Vec::new();
            for l in late(&body, sup) {
                match l {
                    Late::Out(x, _, _) | Late::BoundOut(x, _, _) | Late::In(x, _, _) if x == g => {}
                    Late::Out(x, y, p) if y == g => v.push(Late::BoundOut(x, g, p)),
                    l => v.push(wrap(l, |p| new(g, p))),
                }
            }
            v
        }
        Rep(q) => {
            let bang = Rep(q.clone());
            let (l1, l2) = (late(q, sup), late(q, sup));
            let mut v: Vec<Late> = l1.iter().cloned().map(|l| wrap(l, |p| par(p, bang.clone()))).collect();
            let join = |p, r| par(p, r);
            for l in communications(&l1, &l2, &join) {
                v.push(wrap(l, |p| par(p, bang.clone())));
            }
            v
        }
    }
}

/// Canonical transitions of `p` relative to a support `k`: inputs are
/// instantiated with every name of `fn(p) ∪ k` and with `fresh(fn(p) ∪ k)`,
/// which is also the extruded name of every bound output. Targets are
/// α-canonical.
pub fn sos_step(p: &PiProcess, k: &AtomSet) -> Vec<(PiAction, PiProcess)> {
    let fns = free_names(p);
    let mut known = fns.clone();
    known.extend(k.iter().copied());
    let z_new = fresh(&known);
    let mut in_play = all_atoms(p);
    in_play.extend(known.iter().copied());
    in_play.insert(z_new);
    let mut sup = Supply::above(&in_play);
    let mut out: BTreeSet<(PiAction, PiProcess)> = BTreeSet::new();
    for l in late(p, &mut sup) {
        match l {
            Late::Tau(q) => {
                out.insert((PiAction::Tau, alpha_canonical(&q)));
            }
            Late::Out(x, y, q) => {
                out.insert((PiAction::Out(x, y), alpha_canonical(&q)));
            }
            Late::BoundOut(x, z, q) => {
                out.insert((PiAction::BoundOut(x, z_new), alpha_canonical(&substitute(&q, z, z_new))));
            }
            Late::In(x, w, q) => {
                for z in known.iter().copied().chain([z_new]) {
                    out.insert((PiAction::In(x, z), alpha_canonical(&substitute(&q, w, z))));
                }
            }
        }
    }
    out.into_iter().collect()
}

/// [`sos_step`] with the support taken to be `fn(p)`.
pub fn sos_step_canonical(p: &PiProcess) -> Vec<(PiAction, PiProcess)> {
    sos_step(p, &AtomSet::new())
}

/// Targets of input transitions of `p` on subject `x` receiving the concrete
/// name `z`, α-canonical.
pub fn input_instances(p: &PiProcess, x: Atom, z: Atom) -> Vec<PiProcess> {
    let mut in_play = all_atoms(p);
    in_play.extend([x, z]);
    let mut sup = Supply::above(&in_play);
    let mut out = BTreeSet::new();
    for l in late(p, &mut sup) {
        if let Late::In(x2, w, q) = l {
            if x2 == x {
                out.insert(alpha_canonical(&substitute(&q, w, z)));
            }
        }
    }
    out.into_iter().collect()
}

/// Whether `p --act--> target` is derivable, for concrete names in `act`.
pub fn is_transition(p: &PiProcess, act: &PiAction, target: &PiProcess) -> bool {
    let target = alpha_canonical(target);
    let mut in_play = all_atoms(p);
    in_play.extend(crate::atoms::support_of(act));
    let mut sup = Supply::above(&in_play);
    let fns = free_names(p);
    late(p, &mut sup).into_iter().any(|l| match (l, act) {
        (Late::Tau(q), PiAction::Tau) => alpha_canonical(&q) == target,
        (Late::Out(x, y, q), PiAction::Out(x2, y2)) => x == *x2 && y == *y2 && alpha_canonical(&q) == target,
        (Late::In(x, w, q), PiAction::In(x2, z)) => x == *x2 && alpha_canonical(&substitute(&q, w, *z)) == target,
        (Late::BoundOut(x, g, q), PiAction::BoundOut(x2, z)) => {
            x == *x2 && !fns.contains(z) && alpha_canonical(&substitute(&q, g, *z)) == target
        }
        _ => false,
    })
}

/// A transition as the term `(source, label, target)`.
pub fn transition_term(p: &PiProcess, act: &PiAction, target: &PiProcess) -> AtomTerm {
    AtomTerm::Tuple(vec![to_term(p), act.to_term(), to_term(target)])
}

/// Membership in the transition relation, on terms from [`transition_term`].
pub fn is_transition_term(t: &AtomTerm) -> bool {
    let AtomTerm::Tuple(parts) = t else { return false };
    let [s, a, tg] = parts.as_slice() else { return false };
    match (from_term(s), PiAction::from_term(a), from_term(tg)) {
        (Some(s), Some(a), Some(tg)) => is_transition(&s, &a, &tg),
        _ => false,
    }
}

/// Transitions of the states reachable from `p` within `depth` steps,
/// relative to the support `fn(p)`.
pub fn transition_sample(p: &PiProcess, depth: usize) -> Vec<AtomTerm> {
    let k = free_names(p);
    let mut seen = BTreeSet::from([alpha_canonical(p)]);
    let mut layer = vec![alpha_canonical(p)];
    let mut out = Vec::new();
    for _ in 0..depth {
        let mut next = Vec::new();
        for s in &layer {
            for (a, t) in sos_step(s, &k) {
                out.push(transition_term(s, &a, &t));
                if seen.insert(t.clone()) {
                    next.push(t);
                }
            }
        }
        layer = next;
    }
    out
}

/// The transition system of `p`: α-classes of reachable terms, support `fn(p)`.
pub fn effective_ltsa_of(p: &PiProcess) -> EffectiveLtsA {
    let k = free_names(p);
    let k2 = k.clone();
    EffectiveLtsA::from_successors(k, &to_term(p), move |s| {
        let q = from_term(s).ok_or_else(|| LtsError::Enumerator(format!("{s} is not a process term")))?;
        Ok(sos_step(&q, &k2).into_iter().map(|(a, t)| (a.to_term(), to_term(&t))).collect())
    })
}

// ---------------------------------------------------------------- syntax

/// Identifiers given to atoms by [`parse_pi_named`].
pub type NameTable = BTreeMap<Atom, String>;

#[derive(Debug, Clone)]
enum RawName {
    Ident(String),
    Atom(Atom),
}

#[derive(Debug, Clone)]
enum Raw {
    Nil,
    Tau(Box<Raw>),
    Out(RawName, RawName, Box<Raw>),
    In(RawName, RawName, Box<Raw>),
    Sum(Box<Raw>, Box<Raw>),
    Par(Box<Raw>, Box<Raw>),
    New(RawName, Box<Raw>),
    Rep(Box<Raw>),
}

fn parse_name(cur: &mut Cursor<'_>) -> Result<RawName, ParseError> {
    cur.skip_ws();
    match cur.peek() {
        Some('#') => {
            cur.bump();
            Ok(RawName::Atom(parse_atom(cur)?))
        }
        Some(c) if is_ident_start(c) => {
            let s = cur.take_while(|c| is_ident_char(c) || c == '_');
            if s == "tau" || s == "new" {
                return Err(cur.error(format!("`{s}` is a keyword, not a name")));
            }
            Ok(RawName::Ident(s))
        }
        _ => Err(cur.error("expected a name")),
    }
}

fn parse_par(cur: &mut Cursor<'_>) -> Result<Raw, ParseError> {
    let mut p = parse_sum(cur)?;
    while cur.eat('|') {
        p = Raw::Par(Box::new(p), Box::new(parse_sum(cur)?));
    }
    Ok(p)
}

fn parse_sum(cur: &mut Cursor<'_>) -> Result<Raw, ParseError> {
    let mut p = parse_prefixed(cur)?;
    while cur.eat('+') {
        p = Raw::Sum(Box::new(p), Box::new(parse_prefixed(cur)?));
    }
    Ok(p)
}

fn keyword(cur: &mut Cursor<'_>, kw: &str) -> bool {
    let start = cur.pos();
    if cur.eat_str(kw) && !matches!(cur.peek(), Some(c) if is_ident_char(c) || c == '_') {
        return true;
    }
    cur.reset(start);
    false
}

fn parse_prefixed(cur: &mut Cursor<'_>) -> Result<Raw, ParseError> {
    cur.skip_ws();
    let cont = |cur: &mut Cursor<'_>| -> Result<Box<Raw>, ParseError> {
        cur.expect('.')?;
        Ok(Box::new(parse_prefixed(cur)?))
    };
    match cur.peek() {
        Some('0') => {
            cur.bump();
            Ok(Raw::Nil)
        }
        Some('(') => {
            cur.bump();
            let p = parse_par(cur)?;
            cur.expect(')')?;
            Ok(p)
        }
        Some('!') => {
            cur.bump();
            Ok(Raw::Rep(Box::new(parse_prefixed(cur)?)))
        }
        _ if keyword(cur, "tau") => Ok(Raw::Tau(cont(cur)?)),
        _ if keyword(cur, "new") => {
            let z = parse_name(cur)?;
            Ok(Raw::New(z, cont(cur)?))
        }
        _ => {
            let x = parse_name(cur)?;
            if cur.eat('<') {
                let y = parse_name(cur)?;
                cur.expect('>')?;
                Ok(Raw::Out(x, y, cont(cur)?))
            } else if cur.eat('(') {
                let y = parse_name(cur)?;
                cur.expect(')')?;
                Ok(Raw::In(x, y, cont(cur)?))
            } else {
                Err(cur.error("expected '<' or '(' after a channel name"))
            }
        }
    }
}

fn raw_names<'a>(r: &'a Raw, out: &mut Vec<&'a RawName>) {
    match r {
        Raw::Nil => {}
        Raw::Tau(p) | Raw::Rep(p) => raw_names(p, out),
        Raw::Out(x, y, p) | Raw::In(x, y, p) => {
            out.extend([x, y]);
            raw_names(p, out)
        }
        Raw::New(z, p) => {
            out.push(z);
            raw_names(p, out)
        }
        Raw::Sum(p, q) | Raw::Par(p, q) => {
            raw_names(p, out);
            raw_names(q, out)
        }
    }
}

fn resolve(r: &Raw, ids: &BTreeMap<String, Atom>) -> PiProcess {
    let n = |x: &RawName| match x {
        RawName::Atom(a) => *a,
        RawName::Ident(s) => ids[s],
    };
    match r {
        Raw::Nil => Nil,
        Raw::Tau(p) => Prefix(Prefix::Tau, bx(resolve(p, ids))),
        Raw::Out(x, y, p) => Prefix(Prefix::Out(n(x), n(y)), bx(resolve(p, ids))),
        Raw::In(x, y, p) => Prefix(Prefix::In(n(x), n(y)), bx(resolve(p, ids))),
        Raw::Sum(p, q) => Sum(bx(resolve(p, ids)), bx(resolve(q, ids))),
        Raw::Par(p, q) => Par(bx(resolve(p, ids)), bx(resolve(q, ids))),
        Raw::New(z, p) => New(n(z), bx(resolve(p, ids))),
        Raw::Rep(p) => Rep(bx(resolve(p, ids))),
    }
}

fn locate(text: &str, e: ParseError) -> ParseError {
    let offset = e.column - 1;
    let mut line = 1;
    let mut col = 1;
    for c in text.chars().take(offset) {
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    ParseError::new(line, col, e.message)
}

/// Parses a term. Identifiers become atoms in order of first occurrence,
/// skipping atoms written literally as `#n`.
pub fn parse_pi_named(text: &str) -> Result<(PiProcess, NameTable), ParseError> {
    let body: String = text
        .lines()
        .map(|l| if l.trim_start().starts_with("--") { "" } else { l })
        .collect::<Vec<_>>()
        .join("\n");
    let mut cur = Cursor::new(&body);
    let raw = parse_par(&mut cur).and_then(|r| cur.expect_end().map(|_| r)).map_err(|e| locate(&body, e))?;
    let mut names = Vec::new();
    raw_names(&raw, &mut names);
    let mut taken: AtomSet = names.iter().filter_map(|n| if let RawName::Atom(a) = n { Some(*a) } else { None }).collect();
    let mut ids = BTreeMap::new();
    let mut table = NameTable::new();
    for n in names {
        if let RawName::Ident(s) = n {
            if !ids.contains_key(s) {
                let a = fresh(&taken);
                taken.insert(a);
                ids.insert(s.clone(), a);
                table.insert(a, s.clone());
            }
        }
    }
    Ok((resolve(&raw, &ids), table))
}

pub fn parse_pi(text: &str) -> Result<PiProcess, ParseError> {
    parse_pi_named(text).map(|(p, _)| p)
}

/// Prints with atoms as `#n`; `parse_pi` reads the output back to `p`.
pub fn pretty(p: &PiProcess) -> String {
    pretty_named(p, &NameTable::new())
}

/// Prints atoms through `names` where present.
pub fn pretty_named(p: &PiProcess, names: &NameTable) -> String {
    let mut s = String::new();
    write_par(p, names, &mut s);
    s
}

fn name_text(a: &Atom, names: &NameTable) -> String {
    names.get(a).cloned().unwrap_or_else(|| a.to_string())
}

fn write_par(p: &PiProcess, names: &NameTable, s: &mut String) {
    match p {
        Par(a, b) => {
            write_par(a, names, s);
            s.push_str(" | ");
            write_sum_level(b, names, s);
        }
        _ => write_sum_level(p, names, s),
    }
}

fn write_sum_level(p: &PiProcess, names: &NameTable, s: &mut String) {
    match p {
        Sum(a, b) => {
            write_sum_level(a, names, s);
            s.push_str(" + ");
            write_prefixed(b, names, s);
        }
        _ => write_prefixed(p, names, s),
    }
}

fn write_prefixed(p: &PiProcess, names: &NameTable, s: &mut String) {
    let n = |a: &Atom| name_text(a, names);
    match p {
        Nil => s.push('0'),
        Prefix(pre, q) => {
            match pre {
                Prefix::Tau => s.push_str("tau."),
                Prefix::Out(x, y) => s.push_str(&format!("{}<{}>.", n(x), n(y))),
                Prefix::In(x, y) => s.push_str(&format!("{}({}).", n(x), n(y))),
            }
            write_prefixed(q, names, s)
        }
        New(z, q) => {
            s.push_str(&format!("new {}.", n(z)));
            write_prefixed(q, names, s)
        }
        Rep(q) => {
            s.push('!');
            write_prefixed(q, names, s)
        }
        Sum(..) | Par(..) => {
            s.push('(');
            write_par(p, names, s);
            s.push(')');
        }
    }
}

impl fmt::Display for PiProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty(self))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::atoms::{apply, canonicalize, orbit_eq, Permutation};
    use crate::orbitsets::support_violation;
    use crate::lts::bounded_reach;
    use proptest::prelude::*;

    fn p(s: &str) -> PiProcess {
        parse_pi(s).unwrap()
    }

    fn a(i: u32) -> Atom {
        Atom(i)
    }

    #[test]
    fn parses_the_grammar() {
        assert!(matches!(p("a<b>.0 | a(x).0"), Par(..)));
        assert!(matches!(p("new z.(z<a>.0)"), New(..)));
        assert!(matches!(p("!a(x).x<b>.0"), Rep(..)));
        assert_eq!(p("a<b>.0 + c<d>.0 | e<f>.0"), par(p("a<b>.0 + c<d>.0"), p("#4<#5>.0")));
        assert_eq!(p("tau.0 | tau.0 | tau.0"), par(par(p("tau.0"), p("tau.0")), p("tau.0")));
        assert_eq!(p("newt<u>.0"), Prefix(Prefix::Out(a(0), a(1)), bx(Nil)));
    }

    #[test]
    fn parse_errors_are_located() {
        let e = parse_pi("a<b>.0 |\n  a(x)").unwrap_err();
        assert_eq!((e.line, e.column), (2, 7));
        assert!(parse_pi("tau.0 0").is_err());
        assert!(parse_pi("new tau.0").is_err());
    }

    #[test]
    fn identifiers_skip_literal_atoms() {
        let (q, names) = parse_pi_named("a<#0>.b<a>.0").unwrap();
        assert_eq!(q, p("#1<#0>.#2<#1>.0"));
        assert_eq!(names[&a(1)], "a");
        assert_eq!(pretty_named(&q, &names), "a<#0>.b<a>.0");
    }

    #[test]
    fn pretty_parenthesizes_minimally() {
        for s in ["a<b>.0 | a(x).0", "new z.(z<a>.0 | z(y).0)", "!a(x).x<b>.0", "tau.(tau.0 + 0) | 0 | (0 | 0)", "(0 + 0) + 0"] {
            let q = p(s);
            assert_eq!(parse_pi(&pretty(&q)).unwrap(), q, "{s}");
        }
    }

    #[test]
    fn free_names_examples() {
        assert_eq!(free_names(&p("a<b>.0")), AtomSet::from([a(0), a(1)]));
        assert_eq!(free_names(&p("a(x).x<b>.0")), AtomSet::from([a(0), a(2)]));
        assert_eq!(free_names(&p("new a.(a<b>.0)")), AtomSet::from([a(1)]));
    }

    #[test]
    fn alpha_canonical_examples() {
        assert_eq!(alpha_canonical(&p("a(x).x<b>.0")), alpha_canonical(&p("a(y).y<b>.0")));
        assert_eq!(alpha_canonical(&p("new z.z<z>.0")), alpha_canonical(&p("new w.w<w>.0")));
        assert_eq!(alpha_canonical(&p("a<b>.0")), p("a<b>.0"));
        assert_ne!(alpha_canonical(&p("a(x).x<b>.0")), alpha_canonical(&p("a(x).b<x>.0")));
        // Binders in sibling scopes get distinct atoms.
        assert_eq!(pretty(&alpha_canonical(&p("a(x).0 | a(x).0"))), "#0(#1).0 | #0(#2).0");
    }

    #[test]
    fn substitution_avoids_capture() {
        // (y(x).b<x>){x/y}: the binder must move away from x.
        let q = substitute(&p("y(x).b<x>.0"), a(0), a(1));
        assert_eq!(free_names(&q), AtomSet::from([a(1), a(2)]));
        assert!(alpha_eq(&q, &p("#1(#9).#2<#9>.0")));
    }

    fn has(p0: &PiProcess, act: PiAction, target: &str) -> bool {
        sos_step_canonical(p0).contains(&(act, alpha_canonical(&p(target))))
    }

    #[test]
    fn sos_examples() {
        assert_eq!(sos_step_canonical(&p("tau.0")), vec![(PiAction::Tau, Nil)]);
        // a=#0 b=#1 x=#2 c=#3: COM gives 0 | b<c>.0.
        assert!(has(&p("a<b>.0 | a(x).x<c>.0"), PiAction::Tau, "0 | #1<#3>.0"));
        // z=#0 a=#1: OPEN extrudes the least name outside fn = {#1}.
        assert_eq!(sos_step_canonical(&p("new z.(a<z>.0)")), vec![(PiAction::BoundOut(a(1), a(0)), Nil)]);
    }

    #[test]
    fn input_collapse() {
        // fn = {a}: inputs of a itself and of one fresh name.
        let succ = sos_step_canonical(&p("a(x).x<x>.0"));
        assert_eq!(succ.len(), 2);
        assert!(succ.contains(&(PiAction::In(a(0), a(0)), p("#0<#0>.0"))));
        assert!(succ.contains(&(PiAction::In(a(0), a(1)), p("#1<#1>.0"))));
        // Relative to a larger support every support name is a separate branch.
        assert_eq!(sos_step(&p("a(x).0"), &AtomSet::from([a(0), a(5)])).len(), 3);
    }

    #[test]
    fn close_and_restriction() {
        // a=#0 z=#1 x=#2: CLOSE keeps z private.
        let q = p("new z.a<z>.z<z>.0 | a(x).x(y).0");
        let taus: Vec<_> = sos_step_canonical(&q).into_iter().filter(|(a, _)| *a == PiAction::Tau).collect();
        assert_eq!(taus.len(), 1);
        assert!(alpha_eq(&taus[0].1, &p("new z.(z<z>.0 | z(y).0)")));
        assert_eq!(sos_step_canonical(&taus[0].1).len(), 1);
        // Restricted subjects block.
        assert!(sos_step_canonical(&p("new z.z<a>.0")).is_empty());
        // A name received under a binder of the same name is not captured.
        let r = p("a(x).new y.x<y>.0");
        let (_, t) = sos_step_canonical(&r).into_iter().find(|(act, _)| *act == PiAction::In(a(0), a(0))).unwrap();
        assert_eq!(free_names(&t), AtomSet::from([a(0)]));
    }

    #[test]
    fn parallel_respects_extrusion() {
        // z=#0 a=#1: the extruded name avoids the sibling's free #2.
        let q = p("new z.a<z>.0 | #2<#2>.0");
        let bouts: Vec<_> = sos_step_canonical(&q).into_iter().filter(|(a, _)| matches!(a, PiAction::BoundOut(..))).collect();
        assert_eq!(bouts.len(), 1);
        assert_eq!(bouts[0].0, PiAction::BoundOut(a(1), a(0)));
        let q2 = p("new z.#0<z>.0 | #1<#1>.0");
        assert_eq!(
            sos_step_canonical(&q2).into_iter().find(|(a, _)| matches!(a, PiAction::BoundOut(..))).unwrap().0,
            PiAction::BoundOut(a(0), a(2))
        );
    }

    #[test]
    fn replication_shapes() {
        let bang = p("!(a<b>.0 + a(x).0)");
        let succ = sos_step_canonical(&bang);
        let rest = "!(a<b>.0 + a(x).0)";
        assert!(succ.contains(&(PiAction::Out(a(0), a(1)), alpha_canonical(&p(&format!("0 | {rest}"))))));
        assert!(succ.contains(&(PiAction::Tau, alpha_canonical(&p(&format!("(0 | 0) | {rest}"))))));
        let close = p("!(new z.a<z>.0 + a(x).x<x>.0)");
        let taus: Vec<_> = sos_step_canonical(&close).into_iter().filter(|(a, _)| *a == PiAction::Tau).collect();
        assert_eq!(taus.len(), 1);
        assert!(matches!(&taus[0].1, Par(l, _) if matches!(**l, New(..))));
    }

    #[test]
    fn term_encoding_round_trip() {
        for s in ["0", "a(x).new y.(x<y>.0 | !y(z).z<a>.0)", "new z.z<z>.0 + tau.0"] {
            let q = p(s);
            let t = to_term(&q);
            assert_eq!(crate::atoms::support_of(&t), free_names(&q));
            assert!(alpha_eq(&from_term(&t).unwrap(), &q));
        }
        assert_eq!(to_term(&p("a(x).x<b>.0")), to_term(&p("a(y).y<b>.0")));
    }

    #[test]
    fn transition_system_of_a_term() {
        let l = effective_ltsa_of(&p("a(x).0"));
        let e = bounded_reach(&l, 5).unwrap();
        assert!(e.closed);
        assert_eq!(e.lts.num_states(), 2);
        // Input of a itself, and of a fresh name: two orbits over {a}.
        assert_eq!(e.lts.transitions.len(), 2);
        let dead = effective_ltsa_of(&Nil);
        assert_eq!(bounded_reach(&dead, 5).unwrap().lts.num_states(), 1);
    }

    #[test]
    fn support_certificate_absent() {
        let q = p("a(x).(x<a>.0 | new y.x<y>.0)");
        let k = free_names(&q);
        let sample = transition_sample(&q, 3);
        assert!(!sample.is_empty());
        assert!(support_violation(&sample, &is_transition_term, &k, 8).is_none());
        // A wrong target is rejected.
        let bogus = transition_term(&q, &PiAction::Tau, &Nil);
        assert!(!is_transition_term(&bogus));
    }

    // ---------------------------------------------------------------- properties

    pub(crate) fn arb_process() -> impl Strategy<Value = PiProcess> {
        let name = (0u32..4).prop_map(Atom);
        let leaf = Just(Nil).boxed();
        leaf.prop_recursive(4, 24, 2, move |inner| {
            prop_oneof![
                inner.clone().prop_map(|q| Prefix(Prefix::Tau, bx(q))),
                (name.clone(), name.clone(), inner.clone()).prop_map(|(x, y, q)| Prefix(Prefix::Out(x, y), bx(q))),
                (name.clone(), name.clone(), inner.clone()).prop_map(|(x, y, q)| Prefix(Prefix::In(x, y), bx(q))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Sum(bx(a), bx(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Par(bx(a), bx(b))),
                (name.clone(), inner.clone()).prop_map(|(z, q)| New(z, bx(q))),
                inner.clone().prop_map(|q| Rep(bx(q))),
            ]
        })
    }

    /// Renames atoms outside `fn(source)` canonically, so transitions
    /// differing only in the choice of fresh names compare equal.
    fn normalized(src: &PiProcess, succ: &[(PiAction, PiProcess)]) -> BTreeSet<AtomTerm> {
        let k = free_names(src);
        succ.iter().map(|(a, t)| canonicalize(&AtomTerm::Tuple(vec![a.to_term(), to_term(t)]), &k).0).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn pretty_parse_round_trip(q in arb_process()) {
            prop_assert_eq!(parse_pi(&pretty(&q)).unwrap(), q);
        }

        #[test]
        fn alpha_canonical_is_idempotent_and_complete(q in arb_process(), shift in 5u32..9) {
            let c = alpha_canonical(&q);
            prop_assert_eq!(alpha_canonical(&c), c.clone());
            prop_assert_eq!(free_names(&c), free_names(&q));
            // Rename every binder to a distinct far atom: still α-equal.
            let mut counter = 0u32;
            let renamed = rename_binders(&q, &mut |_| { counter += 1; Atom(100 * shift + counter) });
            prop_assert_eq!(alpha_canonical(&renamed), c);
        }

        #[test]
        fn sos_equivariance(q in arb_process(), x in 0u32..6, y in 0u32..6) {
            let pi = Permutation::transposition(Atom(x), Atom(y));
            let k = free_names(&q);
            let pq = apply(&pi, &q);
            let moved: Vec<(PiAction, PiProcess)> = sos_step_canonical(&q).iter().map(|(a, t)| (apply(&pi, a), apply(&pi, t))).collect();
            prop_assert_eq!(normalized(&pq, &sos_step_canonical(&pq)), normalized(&pq, &moved));
            // The support-fixing case: the transition set is preserved exactly.
            if pi.fixes(&k) {
                prop_assert_eq!(normalized(&q, &sos_step_canonical(&pq)), normalized(&q, &sos_step_canonical(&q)));
            }
        }

        #[test]
        fn free_names_never_grow(q in arb_process()) {
            for (a, t) in sos_step_canonical(&q) {
                let mut allowed = free_names(&q);
                allowed.extend(a.bound_names());
                if let PiAction::In(_, z) = a { allowed.insert(z); }
                prop_assert!(free_names(&t).is_subset(&allowed), "{} --{}--> {}", q, a, t);
            }
        }

        #[test]
        fn input_collapse_is_faithful(q in arb_process(), z in 0u32..12) {
            let k = free_names(&q);
            let succ = sos_step_canonical(&q);
            for (x, _) in succ.iter().filter_map(|(a, t)| if let PiAction::In(x, z) = a { Some(((*x, *z), t)) } else { None }) {
                for t in input_instances(&q, x.0, Atom(z)) {
                    let concrete = (PiAction::In(x.0, Atom(z)).to_term(), to_term(&t));
                    let found = succ.iter().any(|(a2, t2)| orbit_eq(&concrete, &(a2.to_term(), to_term(t2)), &k).is_some());
                    prop_assert!(found, "{} --{}{}--> {}", q, x.0, z, t);
                }
            }
        }
    }

    fn rename_binders(p: &PiProcess, f: &mut dyn FnMut(Atom) -> Atom) -> PiProcess {
        match p {
            Nil => Nil,
            Prefix(Prefix::In(x, y), q) => {
                let y2 = f(*y);
                Prefix(Prefix::In(*x, y2), bx(rename_binders(&substitute(q, *y, y2), f)))
            }
            Prefix(pre, q) => Prefix(pre.clone(), bx(rename_binders(q, f))),
            New(z, q) => {
                let z2 = f(*z);
                New(z2, bx(rename_binders(&substitute(q, *z, z2), f)))
            }
            Sum(a, b) => Sum(bx(rename_binders(a, f)), bx(rename_binders(b, f))),
            Par(a, b) => Par(bx(rename_binders(a, f)), bx(rename_binders(b, f))),
            Rep(q) => Rep(bx(rename_binders(q, f))),
        }
    }
}
