//! Atoms, finitely supported permutations, supports and canonical orbit
//! representatives.
//!
//! Every value that carries atoms implements [`Nominal`], which is all the
//! kernel needs: a left-to-right traversal of atom occurrences and a
//! structure-preserving renaming. Supports, permutation action, canonical
//! forms and orbit equality are then defined once for all such values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::syntax::{is_symbol_char, Cursor, ParseError};

/// An element of the countably infinite carrier. The index only provides
/// identity, a total order for canonical forms, and serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(pub u32);

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

pub type AtomSet = BTreeSet<Atom>;

/// Symbol of the silent action.
pub const TAU: &str = "tau";
/// Symbol of the blank tape cell.
pub const BLANK: &str = "_";

/// Constants, atoms and tuples: states, data symbols and labels alike.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomTerm {
    Const(String),
    Atom(Atom),
    Tuple(Vec<AtomTerm>),
}

impl AtomTerm {
    pub fn constant(symbol: impl Into<String>) -> Self {
        AtomTerm::Const(symbol.into())
    }

    pub fn atom(index: u32) -> Self {
        AtomTerm::Atom(Atom(index))
    }

    pub fn tau() -> Self {
        AtomTerm::Const(TAU.to_string())
    }

    pub fn blank() -> Self {
        AtomTerm::Const(BLANK.to_string())
    }

    pub fn is_tau(&self) -> bool {
        matches!(self, AtomTerm::Const(s) if s == TAU)
    }

    pub fn is_blank(&self) -> bool {
        matches!(self, AtomTerm::Const(s) if s == BLANK)
    }

    pub fn as_atom(&self) -> Option<Atom> {
        match self {
            AtomTerm::Atom(a) => Some(*a),
            _ => None,
        }
    }

    /// Nesting depth: 0 for constants and atoms.
    pub fn depth(&self) -> usize {
        match self {
            AtomTerm::Tuple(ts) => 1 + ts.iter().map(AtomTerm::depth).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Largest tuple arity anywhere in the term.
    pub fn max_arity(&self) -> usize {
        match self {
            AtomTerm::Tuple(ts) => ts.iter().map(AtomTerm::max_arity).max().unwrap_or(0).max(ts.len()),
            _ => 0,
        }
    }
}

impl fmt::Display for AtomTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomTerm::Const(s) => write!(f, "'{s}"),
            AtomTerm::Atom(a) => write!(f, "{a}"),
            AtomTerm::Tuple(ts) => {
                f.write_str("(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for AtomTerm {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cur = Cursor::new(s);
        let t = parse_term(&mut cur)?;
        cur.expect_end()?;
        Ok(t)
    }
}

pub(crate) fn parse_symbol(cur: &mut Cursor<'_>) -> Result<String, ParseError> {
    let sym = cur.take_while(is_symbol_char);
    if sym.is_empty() {
        Err(cur.error("expected a constant symbol after '"))
    } else {
        Ok(sym)
    }
}

pub(crate) fn parse_atom(cur: &mut Cursor<'_>) -> Result<Atom, ParseError> {
    let digits = cur.take_while(|c| c.is_ascii_digit());
    digits.parse::<u32>().map(Atom).map_err(|_| cur.error("expected an atom index after #"))
}

pub(crate) fn parse_term(cur: &mut Cursor<'_>) -> Result<AtomTerm, ParseError> {
    cur.skip_ws();
    match cur.peek() {
        Some('\'') => {
            cur.bump();
            Ok(AtomTerm::Const(parse_symbol(cur)?))
        }
        Some('#') => {
            cur.bump();
            Ok(AtomTerm::Atom(parse_atom(cur)?))
        }
        Some('(') => {
            cur.bump();
            let mut items = Vec::new();
            if cur.eat(')') {
                return Ok(AtomTerm::Tuple(items));
            }
            loop {
                items.push(parse_term(cur)?);
                if cur.eat(')') {
                    return Ok(AtomTerm::Tuple(items));
                }
                cur.expect(',')?;
            }
        }
        _ => Err(cur.error("expected a term ('const, #atom or tuple)")),
    }
}

/// Per-declaration caps on tuple nesting and arity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermBounds {
    pub max_depth: usize,
    pub max_arity: usize,
}

impl Default for TermBounds {
    fn default() -> Self {
        TermBounds { max_depth: 3, max_arity: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("term {term} has nesting depth {depth}, above the declared cap {cap}")]
    Depth { term: String, depth: usize, cap: usize },
    #[error("term {term} has a tuple of arity {arity}, above the declared cap {cap}")]
    Arity { term: String, arity: usize, cap: usize },
}

impl TermBounds {
    pub fn check(&self, term: &AtomTerm) -> Result<(), BoundsError> {
        self.check_shape(term.depth(), term.max_arity(), || term.to_string())
    }

    pub(crate) fn check_shape(
        &self,
        depth: usize,
        arity: usize,
        render: impl Fn() -> String,
    ) -> Result<(), BoundsError> {
        if depth > self.max_depth {
            return Err(BoundsError::Depth { term: render(), depth, cap: self.max_depth });
        }
        if arity > self.max_arity {
            return Err(BoundsError::Arity { term: render(), arity, cap: self.max_arity });
        }
        Ok(())
    }
}

/// Values carrying finitely many atoms, with a fixed traversal order.
pub trait Nominal: Sized {
    /// Visits every atom occurrence, left to right.
    fn visit_atoms(&self, f: &mut dyn FnMut(Atom));
    /// Rebuilds the value with every atom occurrence replaced.
    fn rename_atoms(&self, f: &mut dyn FnMut(Atom) -> Atom) -> Self;
}

impl Nominal for Atom {
    fn visit_atoms(&self, f: &mut dyn FnMut(Atom)) {
        f(*self)
    }
    fn rename_atoms(&self, f: &mut dyn FnMut(Atom) -> Atom) -> Self {
        f(*self)
    }
}

impl Nominal for AtomTerm {
    fn visit_atoms(&self, f: &mut dyn FnMut(Atom)) {
        match self {
            AtomTerm::Const(_) => {}
            AtomTerm::Atom(a) => f(*a),
            AtomTerm::Tuple(ts) => ts.iter().for_each(|t| t.visit_atoms(f)),
        }
    }

    fn rename_atoms(&self, f: &mut dyn FnMut(Atom) -> Atom) -> Self {
        match self {
            AtomTerm::Const(s) => AtomTerm::Const(s.clone()),
            AtomTerm::Atom(a) => AtomTerm::Atom(f(*a)),
            AtomTerm::Tuple(ts) => AtomTerm::Tuple(ts.iter().map(|t| t.rename_atoms(f)).collect()),
        }
    }
}

impl<T: Nominal> Nominal for Vec<T> {
    fn visit_atoms(&self, f: &mut dyn FnMut(Atom)) {
        self.iter().for_each(|t| t.visit_atoms(f))
    }
    fn rename_atoms(&self, f: &mut dyn FnMut(Atom) -> Atom) -> Self {
        self.iter().map(|t| t.rename_atoms(f)).collect()
    }
}

impl<A: Nominal, B: Nominal> Nominal for (A, B) {
    fn visit_atoms(&self, f: &mut dyn FnMut(Atom)) {
        self.0.visit_atoms(f);
        self.1.visit_atoms(f);
    }
    fn rename_atoms(&self, f: &mut dyn FnMut(Atom) -> Atom) -> Self {
        (self.0.rename_atoms(f), self.1.rename_atoms(f))
    }
}

impl<A: Nominal, B: Nominal, C: Nominal> Nominal for (A, B, C) {
    fn visit_atoms(&self, f: &mut dyn FnMut(Atom)) {
        self.0.visit_atoms(f);
        self.1.visit_atoms(f);
        self.2.visit_atoms(f);
    }
    fn rename_atoms(&self, f: &mut dyn FnMut(Atom) -> Atom) -> Self {
        (self.0.rename_atoms(f), self.1.rename_atoms(f), self.2.rename_atoms(f))
    }
}

/// Atoms in order of first occurrence, without repetition.
pub fn atoms_in_order<T: Nominal>(t: &T) -> Vec<Atom> {
    let mut seen = AtomSet::new();
    let mut out = Vec::new();
    t.visit_atoms(&mut |a| {
        if seen.insert(a) {
            out.push(a);
        }
    });
    out
}

/// The least support of a single value: the atoms occurring in it.
pub fn support_of<T: Nominal>(t: &T) -> AtomSet {
    let mut s = AtomSet::new();
    t.visit_atoms(&mut |a| {
        s.insert(a);
    });
    s
}

/// The least-index atom outside `avoid`.
pub fn fresh(avoid: &AtomSet) -> Atom {
    let mut i = 0u32;
    for a in avoid {
        if a.0 > i {
            break;
        }
        if a.0 == i {
            i += 1;
        }
    }
    Atom(i)
}

/// The `n` least atoms outside `avoid`, ascending.
pub fn fresh_n(avoid: &AtomSet, n: usize) -> Vec<Atom> {
    let mut out = Vec::with_capacity(n);
    let mut i = 0u32;
    while out.len() < n {
        if !avoid.contains(&Atom(i)) {
            out.push(Atom(i));
        }
        i += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PermutationError {
    #[error("atom {0} is mapped twice")]
    NotFunctional(Atom),
    #[error("atom {0} is hit twice")]
    NotInjective(Atom),
    #[error("domain and range differ")]
    NotBijective,
}

/// A finitely supported bijection on atoms; only non-fixed points are stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    map: BTreeMap<Atom, Atom>,
}

impl Permutation {
    pub fn identity() -> Self {
        Permutation::default()
    }

    pub fn transposition(a: Atom, b: Atom) -> Self {
        let mut map = BTreeMap::new();
        if a != b {
            map.insert(a, b);
            map.insert(b, a);
        }
        Permutation { map }
    }

    /// Builds a permutation from explicit pairs whose domain equals their range.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Atom, Atom)>) -> Result<Self, PermutationError> {
        let mut map = BTreeMap::new();
        let mut range = AtomSet::new();
        for (a, b) in pairs {
            if map.insert(a, b).is_some() {
                return Err(PermutationError::NotFunctional(a));
            }
            if !range.insert(b) {
                return Err(PermutationError::NotInjective(b));
            }
        }
        if map.keys().copied().collect::<AtomSet>() != range {
            return Err(PermutationError::NotBijective);
        }
        map.retain(|a, b| a != b);
        Ok(Permutation { map })
    }

    /// Extends a finite partial injection to a permutation, closing each open
    /// chain by mapping the unused range atoms back onto the unused domain atoms.
    pub fn extending(injection: &BTreeMap<Atom, Atom>) -> Self {
        let domain: AtomSet = injection.keys().copied().collect();
        let range: AtomSet = injection.values().copied().collect();
        debug_assert_eq!(domain.len(), range.len(), "injection required");
        let mut map = injection.clone();
        for (r, d) in range.difference(&domain).zip(domain.difference(&range)) {
            map.insert(*r, *d);
        }
        map.retain(|a, b| a != b);
        Permutation { map }
    }

    pub fn apply_atom(&self, a: Atom) -> Atom {
        self.map.get(&a).copied().unwrap_or(a)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        let keys: AtomSet = self.map.keys().chain(other.map.keys()).copied().collect();
        let map = keys
            .into_iter()
            .map(|a| (a, self.apply_atom(other.apply_atom(a))))
            .filter(|(a, b)| a != b)
            .collect();
        Permutation { map }
    }

    pub fn inverse(&self) -> Permutation {
        Permutation { map: self.map.iter().map(|(a, b)| (*b, *a)).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.map.is_empty()
    }

    pub fn fixes(&self, atoms: &AtomSet) -> bool {
        atoms.iter().all(|a| self.apply_atom(*a) == *a)
    }

    /// The atoms moved by the permutation.
    pub fn moved(&self) -> AtomSet {
        self.map.keys().copied().collect()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Atom, Atom)> + '_ {
        self.map.iter().map(|(a, b)| (*a, *b))
    }
}

impl fmt::Display for Permutation {
    /// Cycle notation, e.g. `(#1 #2)(#3 #5 #4)`; the identity prints as `id`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.map.is_empty() {
            return f.write_str("id");
        }
        let mut done = AtomSet::new();
        for &start in self.map.keys() {
            if done.contains(&start) {
                continue;
            }
            f.write_str("(")?;
            let mut a = start;
            let mut first = true;
            loop {
                done.insert(a);
                if !first {
                    f.write_str(" ")?;
                }
                first = false;
                write!(f, "{a}")?;
                a = self.apply_atom(a);
                if a == start {
                    break;
                }
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Replaces every atom `a` in `t` by `p(a)`.
pub fn apply<T: Nominal>(p: &Permutation, t: &T) -> T {
    if p.is_identity() {
        return t.rename_atoms(&mut |a| a);
    }
    t.rename_atoms(&mut |a| p.apply_atom(a))
}

/// Renames non-protected atoms, in first-occurrence order, to the least atoms
/// outside `protected`. Returns the result and a permutation realizing it.
pub fn canonicalize<T: Nominal>(t: &T, protected: &AtomSet) -> (T, Permutation) {
    let movable: Vec<Atom> = atoms_in_order(t).into_iter().filter(|a| !protected.contains(a)).collect();
    let targets = fresh_n(protected, movable.len());
    let injection: BTreeMap<Atom, Atom> = movable.into_iter().zip(targets).collect();
    let p = Permutation::extending(&injection);
    (apply(&p, t), p)
}

/// A `protected`-fixing permutation mapping `t1` to `t2`, if one exists.
///
/// Two values are in the same orbit iff their canonical forms coincide, and
/// the witness is then `p2⁻¹ ∘ p1` for the canonicalizing permutations.
pub fn orbit_eq<T: Nominal + Eq>(t1: &T, t2: &T, protected: &AtomSet) -> Option<Permutation> {
    let (c1, p1) = canonicalize(t1, protected);
    let (c2, p2) = canonicalize(t2, protected);
    if c1 == c2 {
        Some(p2.inverse().compose(&p1))
    } else {
        None
    }
}
