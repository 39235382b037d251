//! Finite symbolic presentations of legal, orbit-finite sets with atoms.
//!
//! An [`OrbitDescriptor`] is a pattern (an [`AtomTerm`] with variables at atom
//! positions) plus a conjunction of (dis)equalities. Variables that occur only
//! in the constraint are existentially quantified. An [`OrbitSet`] is a finite
//! union of descriptors together with its declared support.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use petgraph::unionfind::UnionFind;
use thiserror::Error;

use crate::atoms::{
    apply, atoms_in_order, canonicalize, fresh, parse_atom, parse_symbol, support_of, Atom, AtomSet,
    AtomTerm, Permutation, TermBounds,
};
use crate::syntax::{is_ident_char, is_ident_start, Cursor, ParseError};

/// Variable valuation.
pub type Binding = BTreeMap<String, Atom>;

/// An [`AtomTerm`] with variables standing for atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pattern {
    Const(String),
    Atom(Atom),
    Var(String),
    Tuple(Vec<Pattern>),
}

impl Pattern {
    pub fn var(name: impl Into<String>) -> Self {
        Pattern::Var(name.into())
    }

    pub fn constant(symbol: impl Into<String>) -> Self {
        Pattern::Const(symbol.into())
    }

    /// The ground pattern denoting exactly `t`.
    pub fn from_term(t: &AtomTerm) -> Self {
        match t {
            AtomTerm::Const(s) => Pattern::Const(s.clone()),
            AtomTerm::Atom(a) => Pattern::Atom(*a),
            AtomTerm::Tuple(ts) => Pattern::Tuple(ts.iter().map(Pattern::from_term).collect()),
        }
    }

    /// Replaces atoms by variables as directed by `names`; other atoms stay explicit.
    pub fn abstracting(t: &AtomTerm, names: &BTreeMap<Atom, String>) -> Self {
        match t {
            AtomTerm::Const(s) => Pattern::Const(s.clone()),
            AtomTerm::Atom(a) => match names.get(a) {
                Some(v) => Pattern::Var(v.clone()),
                None => Pattern::Atom(*a),
            },
            AtomTerm::Tuple(ts) => Pattern::Tuple(ts.iter().map(|t| Pattern::abstracting(t, names)).collect()),
        }
    }

    /// Variables in order of first occurrence.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Pattern::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone())
                }
            }
            Pattern::Tuple(ps) => ps.iter().for_each(|p| p.collect_vars(out)),
            _ => {}
        }
    }

    /// Explicit atoms of the pattern.
    pub fn atoms(&self) -> AtomSet {
        let mut s = AtomSet::new();
        self.collect_atoms(&mut s);
        s
    }

    fn collect_atoms(&self, out: &mut AtomSet) {
        match self {
            Pattern::Atom(a) => {
                out.insert(*a);
            }
            Pattern::Tuple(ps) => ps.iter().for_each(|p| p.collect_atoms(out)),
            _ => {}
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Pattern::Tuple(ps) => 1 + ps.iter().map(Pattern::depth).max().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn max_arity(&self) -> usize {
        match self {
            Pattern::Tuple(ps) => ps.iter().map(Pattern::max_arity).max().unwrap_or(0).max(ps.len()),
            _ => 0,
        }
    }

    pub fn check_bounds(&self, bounds: &TermBounds) -> Result<(), crate::atoms::BoundsError> {
        bounds.check_shape(self.depth(), self.max_arity(), || self.to_string())
    }

    /// Extends `binding` so that the pattern denotes `t`. Variables match atoms only.
    pub fn match_term(&self, t: &AtomTerm, binding: &mut Binding) -> bool {
        match (self, t) {
            (Pattern::Const(a), AtomTerm::Const(b)) => a == b,
            (Pattern::Atom(a), AtomTerm::Atom(b)) => a == b,
            (Pattern::Var(v), AtomTerm::Atom(b)) => match binding.get(v) {
                Some(x) => x == b,
                None => {
                    binding.insert(v.clone(), *b);
                    true
                }
            },
            (Pattern::Tuple(ps), AtomTerm::Tuple(ts)) => {
                ps.len() == ts.len() && ps.iter().zip(ts).all(|(p, t)| p.match_term(t, binding))
            }
            _ => false,
        }
    }

    /// Substitutes bound variables; fails on the first unbound one.
    pub fn instantiate(&self, binding: &Binding) -> Result<AtomTerm, String> {
        Ok(match self {
            Pattern::Const(s) => AtomTerm::Const(s.clone()),
            Pattern::Atom(a) => AtomTerm::Atom(*a),
            Pattern::Var(v) => AtomTerm::Atom(*binding.get(v).ok_or_else(|| v.clone())?),
            Pattern::Tuple(ps) => {
                AtomTerm::Tuple(ps.iter().map(|p| p.instantiate(binding)).collect::<Result<_, _>>()?)
            }
        })
    }

    /// Renames variables; unmapped ones are kept.
    pub fn rename_vars(&self, names: &BTreeMap<String, String>) -> Pattern {
        match self {
            Pattern::Var(v) => Pattern::Var(names.get(v).cloned().unwrap_or_else(|| v.clone())),
            Pattern::Tuple(ps) => Pattern::Tuple(ps.iter().map(|p| p.rename_vars(names)).collect()),
            other => other.clone(),
        }
    }

    /// Applies a permutation to explicit atoms.
    pub fn permute(&self, p: &Permutation) -> Pattern {
        match self {
            Pattern::Atom(a) => Pattern::Atom(p.apply_atom(*a)),
            Pattern::Tuple(ps) => Pattern::Tuple(ps.iter().map(|q| q.permute(p)).collect()),
            other => other.clone(),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Const(s) => write!(f, "'{s}"),
            Pattern::Atom(a) => write!(f, "{a}"),
            Pattern::Var(v) => f.write_str(v),
            Pattern::Tuple(ps) => {
                f.write_str("(")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for Pattern {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cur = Cursor::new(s);
        let p = parse_pattern(&mut cur)?;
        cur.expect_end()?;
        Ok(p)
    }
}

pub(crate) fn parse_ident(cur: &mut Cursor<'_>) -> Result<String, ParseError> {
    cur.skip_ws();
    match cur.peek() {
        Some(c) if is_ident_start(c) => Ok(cur.take_while(is_ident_char)),
        _ => Err(cur.error("expected a variable name [a-z][a-z0-9]*")),
    }
}

pub(crate) fn parse_pattern(cur: &mut Cursor<'_>) -> Result<Pattern, ParseError> {
    cur.skip_ws();
    match cur.peek() {
        Some('\'') => {
            cur.bump();
            Ok(Pattern::Const(parse_symbol(cur)?))
        }
        Some('#') => {
            cur.bump();
            Ok(Pattern::Atom(parse_atom(cur)?))
        }
        Some('(') => {
            cur.bump();
            let mut items = Vec::new();
            if cur.eat(')') {
                return Ok(Pattern::Tuple(items));
            }
            loop {
                items.push(parse_pattern(cur)?);
                if cur.eat(')') {
                    return Ok(Pattern::Tuple(items));
                }
                cur.expect(',')?;
            }
        }
        Some(c) if is_ident_start(c) => Ok(Pattern::Var(parse_ident(cur)?)),
        _ => Err(cur.error("expected a pattern")),
    }
}

/// One side of a literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operand {
    Var(String),
    Atom(Atom),
    Const(String),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(v) => f.write_str(v),
            Operand::Atom(a) => write!(f, "{a}"),
            Operand::Const(s) => write!(f, "'{s}"),
        }
    }
}

/// `lhs = rhs` when `equal`, `lhs != rhs` otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub lhs: Operand,
    pub rhs: Operand,
    pub equal: bool,
}

impl Literal {
    pub fn eq(lhs: Operand, rhs: Operand) -> Self {
        Literal { lhs, rhs, equal: true }
    }

    pub fn ne(lhs: Operand, rhs: Operand) -> Self {
        Literal { lhs, rhs, equal: false }
    }

    fn substitute(&self, binding: &Binding) -> Literal {
        let sub = |o: &Operand| match o {
            Operand::Var(v) => binding.get(v).map(|a| Operand::Atom(*a)).unwrap_or_else(|| o.clone()),
            other => other.clone(),
        };
        Literal { lhs: sub(&self.lhs), rhs: sub(&self.rhs), equal: self.equal }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, if self.equal { "=" } else { "!=" }, self.rhs)
    }
}

fn parse_operand(cur: &mut Cursor<'_>) -> Result<Operand, ParseError> {
    cur.skip_ws();
    match cur.peek() {
        Some('#') => {
            cur.bump();
            Ok(Operand::Atom(parse_atom(cur)?))
        }
        Some('\'') => {
            cur.bump();
            Ok(Operand::Const(parse_symbol(cur)?))
        }
        _ => Ok(Operand::Var(parse_ident(cur)?)),
    }
}

fn parse_literal(cur: &mut Cursor<'_>) -> Result<Literal, ParseError> {
    let lhs = parse_operand(cur)?;
    let equal = if cur.eat_str("!=") {
        false
    } else if cur.eat('=') {
        true
    } else {
        return Err(cur.error("expected '=' or '!='"));
    };
    let rhs = parse_operand(cur)?;
    Ok(Literal { lhs, rhs, equal })
}

/// Parses `<lit>, <lit>, ...` up to the end of input.
pub(crate) fn parse_literals(cur: &mut Cursor<'_>) -> Result<Vec<Literal>, ParseError> {
    let mut lits = vec![parse_literal(cur)?];
    while cur.eat(',') {
        lits.push(parse_literal(cur)?);
    }
    Ok(lits)
}

/// A finite conjunction of (dis)equality literals.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EqConstraint {
    pub literals: Vec<Literal>,
}

impl EqConstraint {
    pub fn new(literals: Vec<Literal>) -> Self {
        EqConstraint { literals }
    }

    /// Pairwise distinctness of `vars`, and distinctness from every atom of `avoid`.
    pub fn all_distinct(vars: &[String], avoid: &AtomSet) -> Self {
        let mut literals = Vec::new();
        for (i, v) in vars.iter().enumerate() {
            for w in &vars[i + 1..] {
                literals.push(Literal::ne(Operand::Var(v.clone()), Operand::Var(w.clone())));
            }
            for a in avoid {
                literals.push(Literal::ne(Operand::Var(v.clone()), Operand::Atom(*a)));
            }
        }
        EqConstraint { literals }
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in &self.literals {
            for o in [&l.lhs, &l.rhs] {
                if let Operand::Var(v) = o {
                    if !out.contains(v) {
                        out.push(v.clone());
                    }
                }
            }
        }
        out
    }

    pub fn atoms(&self) -> AtomSet {
        let mut s = AtomSet::new();
        for l in &self.literals {
            for o in [&l.lhs, &l.rhs] {
                if let Operand::Atom(a) = o {
                    s.insert(*a);
                }
            }
        }
        s
    }

    pub fn substitute(&self, binding: &Binding) -> EqConstraint {
        EqConstraint { literals: self.literals.iter().map(|l| l.substitute(binding)).collect() }
    }

    pub fn rename_vars(&self, names: &BTreeMap<String, String>) -> EqConstraint {
        let r = |o: &Operand| match o {
            Operand::Var(v) => Operand::Var(names.get(v).cloned().unwrap_or_else(|| v.clone())),
            other => other.clone(),
        };
        EqConstraint {
            literals: self.literals.iter().map(|l| Literal { lhs: r(&l.lhs), rhs: r(&l.rhs), equal: l.equal }).collect(),
        }
    }

    pub fn permute(&self, p: &Permutation) -> EqConstraint {
        let r = |o: &Operand| match o {
            Operand::Atom(a) => Operand::Atom(p.apply_atom(*a)),
            other => other.clone(),
        };
        EqConstraint {
            literals: self.literals.iter().map(|l| Literal { lhs: r(&l.lhs), rhs: r(&l.rhs), equal: l.equal }).collect(),
        }
    }

    /// Satisfiability over the infinite carrier, by union-find: equalities
    /// merge classes; the constraint fails iff a disequality lies inside one
    /// class or a class holds two distinct rigid operands (atoms or constants).
    pub fn sat(&self) -> bool {
        let mut index: BTreeMap<&Operand, usize> = BTreeMap::new();
        for l in &self.literals {
            for o in [&l.lhs, &l.rhs] {
                let n = index.len();
                index.entry(o).or_insert(n);
            }
        }
        let mut uf = UnionFind::<usize>::new(index.len());
        for l in self.literals.iter().filter(|l| l.equal) {
            uf.union(index[&l.lhs], index[&l.rhs]);
        }
        if self.literals.iter().any(|l| !l.equal && uf.equiv(index[&l.lhs], index[&l.rhs])) {
            return false;
        }
        let mut rigid: BTreeMap<usize, &Operand> = BTreeMap::new();
        for (o, &i) in &index {
            if matches!(o, Operand::Var(_)) {
                continue;
            }
            if let Some(prev) = rigid.insert(uf.find(i), o) {
                if prev != *o {
                    return false;
                }
            }
        }
        true
    }

    /// The first literal that is false under a valuation covering all its variables.
    pub fn violated_by(&self, binding: &Binding) -> Option<&Literal> {
        self.literals.iter().find(|l| {
            let g = l.substitute(binding);
            let ground = !matches!(g.lhs, Operand::Var(_)) && !matches!(g.rhs, Operand::Var(_));
            ground && ((g.lhs == g.rhs) != g.equal)
        })
    }
}

impl fmt::Display for EqConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrbitError {
    #[error("variable {0} has no value")]
    MissingVariable(String),
    #[error("valuation violates {0}")]
    Violated(Literal),
    #[error("valuation leaves the constraint unsatisfiable")]
    Unsatisfiable,
    #[error("code {0} is not the encoding of any descriptor list")]
    NotACode(String),
    #[error("code {0} is not the encoding of a triple descriptor")]
    NotATripleCode(String),
}

/// Pattern plus constraint: the set builder `{pattern | constraint}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrbitDescriptor {
    pub pattern: Pattern,
    pub constraint: EqConstraint,
}

impl OrbitDescriptor {
    pub fn new(pattern: Pattern, constraint: EqConstraint) -> Self {
        OrbitDescriptor { pattern, constraint }
    }

    pub fn unconstrained(pattern: Pattern) -> Self {
        OrbitDescriptor { pattern, constraint: EqConstraint::default() }
    }

    /// Pattern variables first, then constraint-only variables.
    pub fn vars(&self) -> Vec<String> {
        let mut vs = self.pattern.vars();
        for v in self.constraint.vars() {
            if !vs.contains(&v) {
                vs.push(v);
            }
        }
        vs
    }

    pub fn atoms(&self) -> AtomSet {
        let mut s = self.pattern.atoms();
        s.extend(self.constraint.atoms());
        s
    }

    /// Does the descriptor denote `t`?
    pub fn matches(&self, t: &AtomTerm) -> bool {
        let mut b = Binding::new();
        self.pattern.match_term(t, &mut b) && self.constraint.substitute(&b).sat()
    }

    pub fn permute(&self, p: &Permutation) -> OrbitDescriptor {
        OrbitDescriptor { pattern: self.pattern.permute(p), constraint: self.constraint.permute(p) }
    }
}

impl fmt::Display for OrbitDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "orbit {}", self.pattern)?;
        if !self.constraint.is_empty() {
            write!(f, " where {}", self.constraint)?;
        }
        Ok(())
    }
}

impl FromStr for OrbitDescriptor {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cur = Cursor::new(s);
        if !cur.eat_str("orbit") {
            return Err(cur.error("expected 'orbit'"));
        }
        let pattern = parse_pattern(&mut cur)?;
        let constraint = if cur.eat_str("where") {
            EqConstraint::new(parse_literals(&mut cur)?)
        } else {
            EqConstraint::default()
        };
        cur.expect_end()?;
        Ok(OrbitDescriptor { pattern, constraint })
    }
}

/// A finite union of descriptors over a declared support.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OrbitSet {
    pub support: AtomSet,
    pub descriptors: Vec<OrbitDescriptor>,
}

impl OrbitSet {
    pub fn new(support: AtomSet, descriptors: Vec<OrbitDescriptor>) -> Self {
        OrbitSet { support, descriptors }
    }

    /// Explicit atoms used by descriptors but missing from the support.
    pub fn unsupported_atoms(&self) -> AtomSet {
        self.descriptors.iter().flat_map(|d| d.atoms()).filter(|a| !self.support.contains(a)).collect()
    }
}

/// True iff some descriptor of `s` denotes `t`.
pub fn member(t: &AtomTerm, s: &OrbitSet) -> bool {
    s.descriptors.iter().any(|d| d.matches(t))
}

/// The pattern of `d` under `val`, after checking the constraint.
pub fn instantiate(d: &OrbitDescriptor, val: &Binding) -> Result<AtomTerm, OrbitError> {
    for v in d.pattern.vars() {
        if !val.contains_key(&v) {
            return Err(OrbitError::MissingVariable(v));
        }
    }
    if let Some(l) = d.constraint.violated_by(val) {
        return Err(OrbitError::Violated(l.clone()));
    }
    if !d.constraint.substitute(val).sat() {
        return Err(OrbitError::Unsatisfiable);
    }
    d.pattern.instantiate(val).map_err(OrbitError::MissingVariable)
}

/// Every valuation of `vars` up to automorphisms fixing `protected` and the
/// atoms already in `fixed`, consistent with `constraint`.
///
/// Variables are assigned in order; each takes a protected atom, an atom
/// introduced by an earlier variable, or the next fresh atom (restricted
/// growth). Fresh atoms are therefore the least atoms outside `protected`,
/// introduced in variable order.
pub fn canonical_valuations(
    vars: &[String],
    fixed: &Binding,
    protected: &AtomSet,
    constraint: &EqConstraint,
) -> Vec<Binding> {
    let mut base = protected.clone();
    base.extend(fixed.values().copied());
    let mut out = Vec::new();
    let mut cur = fixed.clone();
    let mut introduced = Vec::new();
    extend_valuations(vars, &base, constraint, &mut cur, &mut introduced, &mut out);
    out
}

fn extend_valuations(
    vars: &[String],
    base: &AtomSet,
    constraint: &EqConstraint,
    cur: &mut Binding,
    introduced: &mut Vec<Atom>,
    out: &mut Vec<Binding>,
) {
    if !constraint.substitute(cur).sat() {
        return;
    }
    let Some((v, rest)) = vars.split_first() else {
        out.push(cur.clone());
        return;
    };
    if cur.contains_key(v) {
        extend_valuations(rest, base, constraint, cur, introduced, out);
        return;
    }
    let mut avoid = base.clone();
    avoid.extend(introduced.iter().copied());
    let next = fresh(&avoid);
    let candidates: Vec<Atom> = base.iter().copied().chain(introduced.iter().copied()).chain([next]).collect();
    for a in candidates {
        cur.insert(v.clone(), a);
        let is_new = a == next;
        if is_new {
            introduced.push(a);
        }
        extend_valuations(rest, base, constraint, cur, introduced, out);
        if is_new {
            introduced.pop();
        }
        cur.remove(v);
    }
}

/// One canonical representative per orbit of `s` over its support.
pub fn canonical_enumerate(s: &OrbitSet) -> Vec<AtomTerm> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for d in &s.descriptors {
        let vars = d.pattern.vars();
        for val in canonical_valuations(&vars, &Binding::new(), &s.support, &d.constraint) {
            let Ok(t) = d.pattern.instantiate(&val) else { continue };
            let (c, _) = canonicalize(&t, &s.support);
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
    }
    out
}

/// Bounded search for a `k`-fixing transposition that moves a sample element
/// out of the set recognised by `membership`.
///
/// Candidate partners are the non-`k` atoms of the sample plus `budget` atoms
/// not occurring in it. `None` means no violation was found within the budget.
pub fn support_violation(
    sample: &[AtomTerm],
    membership: &dyn Fn(&AtomTerm) -> bool,
    k: &AtomSet,
    budget: usize,
) -> Option<(Permutation, AtomTerm)> {
    let mut seen: AtomSet = sample.iter().flat_map(support_of).collect();
    seen.extend(k.iter().copied());
    let mut candidates: Vec<Atom> = sample.iter().flat_map(support_of).filter(|a| !k.contains(a)).collect();
    candidates.sort();
    candidates.dedup();
    candidates.extend(crate::atoms::fresh_n(&seen, budget));
    for t in sample {
        for a in support_of(t).into_iter().filter(|a| !k.contains(a)) {
            for &b in candidates.iter().filter(|&&b| b != a) {
                let p = Permutation::transposition(a, b);
                if !membership(&apply(&p, t)) {
                    return Some((p, t.clone()));
                }
            }
        }
    }
    None
}

/// The descriptor of the orbit of `t` over `k`, with its valuation.
///
/// Non-`k` atoms become variables `x0, x1, ...` in first-occurrence order,
/// constrained pairwise distinct and distinct from `k`.
pub fn state_descriptor(t: &AtomTerm, k: &AtomSet) -> (OrbitDescriptor, Vec<Atom>) {
    let atoms: Vec<Atom> = atoms_in_order(t).into_iter().filter(|a| !k.contains(a)).collect();
    let names: BTreeMap<Atom, String> = atoms.iter().enumerate().map(|(i, a)| (*a, format!("x{i}"))).collect();
    let vars: Vec<String> = (0..atoms.len()).map(|i| format!("x{i}")).collect();
    let d = OrbitDescriptor::new(Pattern::abstracting(t, &names), EqConstraint::all_distinct(&vars, k));
    (d, atoms)
}

/// A descriptor for an orbit of transitions `(s, a, t)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TripleDescriptor {
    pub source: Pattern,
    pub action: Pattern,
    pub target: Pattern,
    pub constraint: EqConstraint,
}

impl TripleDescriptor {
    /// All variables: source variables first, then the rest in order of occurrence.
    pub fn vars(&self) -> Vec<String> {
        let mut vs = self.source.vars();
        for v in self.action.vars().into_iter().chain(self.target.vars()).chain(self.constraint.vars()) {
            if !vs.contains(&v) {
                vs.push(v);
            }
        }
        vs
    }

    pub fn source_descriptor(&self) -> OrbitDescriptor {
        OrbitDescriptor::new(self.source.clone(), self.constraint.clone())
    }

    pub fn action_descriptor(&self) -> OrbitDescriptor {
        OrbitDescriptor::new(self.action.clone(), self.constraint.clone())
    }

    pub fn target_descriptor(&self) -> OrbitDescriptor {
        OrbitDescriptor::new(self.target.clone(), self.constraint.clone())
    }

    pub fn as_descriptor(&self) -> OrbitDescriptor {
        OrbitDescriptor::new(
            Pattern::Tuple(vec![self.source.clone(), self.action.clone(), self.target.clone()]),
            self.constraint.clone(),
        )
    }
}

/// The orbit of the transition `(s, a, t)` over `k`.
///
/// Source atoms get the same names as in [`state_descriptor`]; atoms new in
/// the action or target follow as further variables in increasing atom order,
/// so that re-instantiating with least fresh atoms reproduces the original
/// whenever those atoms were themselves the least fresh ones.
pub fn triple_descriptor(s: &AtomTerm, a: &AtomTerm, t: &AtomTerm, k: &AtomSet) -> (TripleDescriptor, Vec<Atom>) {
    let source_atoms: Vec<Atom> = atoms_in_order(s).into_iter().filter(|x| !k.contains(x)).collect();
    let mut new_atoms: Vec<Atom> = support_of(a)
        .union(&support_of(t))
        .copied()
        .filter(|x| !k.contains(x) && !source_atoms.contains(x))
        .collect();
    new_atoms.sort();
    let all: Vec<Atom> = source_atoms.iter().chain(&new_atoms).copied().collect();
    let names: BTreeMap<Atom, String> = all.iter().enumerate().map(|(i, x)| (*x, format!("x{i}"))).collect();
    let vars: Vec<String> = (0..all.len()).map(|i| format!("x{i}")).collect();
    let d = TripleDescriptor {
        source: Pattern::abstracting(s, &names),
        action: Pattern::abstracting(a, &names),
        target: Pattern::abstracting(t, &names),
        constraint: EqConstraint::all_distinct(&vars, k),
    };
    (d, source_atoms)
}

/// A natural number encoding a descriptor list or a triple descriptor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SetBuilderCode(pub BigUint);

const KIND_LIST: u64 = 0;
const KIND_TRIPLE: u64 = 1;
const TAG_CONST: u64 = 0;
const TAG_ATOM: u64 = 1;
const TAG_VAR: u64 = 2;
const TAG_TUPLE: u64 = 3;

impl SetBuilderCode {
    /// Tape symbol carrying the code, e.g. `c1234`.
    pub fn symbol(&self) -> String {
        format!("c{}", self.0)
    }

    pub fn to_term(&self) -> AtomTerm {
        AtomTerm::Const(self.symbol())
    }

    pub fn from_term(t: &AtomTerm) -> Option<SetBuilderCode> {
        match t {
            AtomTerm::Const(s) => s.strip_prefix('c')?.parse::<BigUint>().ok().map(SetBuilderCode),
            _ => None,
        }
    }
}

impl fmt::Display for SetBuilderCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Prefix-free bit writer: Elias-gamma naturals, length-prefixed byte strings.
#[derive(Default)]
struct Bits {
    bits: Vec<bool>,
}

impl Bits {
    fn nat(&mut self, n: u64) {
        let m = n + 1;
        let width = 64 - m.leading_zeros() as usize;
        self.bits.extend(std::iter::repeat_n(false, width - 1));
        for i in (0..width).rev() {
            self.bits.push((m >> i) & 1 == 1);
        }
    }

    fn bit(&mut self, b: bool) {
        self.bits.push(b);
    }

    fn string(&mut self, s: &str) {
        self.nat(s.len() as u64);
        for byte in s.bytes() {
            for i in (0..8).rev() {
                self.bits.push((byte >> i) & 1 == 1);
            }
        }
    }

    fn pattern(&mut self, p: &Pattern) {
        match p {
            Pattern::Const(s) => {
                self.nat(TAG_CONST);
                self.string(s);
            }
            Pattern::Atom(a) => {
                self.nat(TAG_ATOM);
                self.nat(a.0 as u64);
            }
            Pattern::Var(v) => {
                self.nat(TAG_VAR);
                self.string(v);
            }
            Pattern::Tuple(ps) => {
                self.nat(TAG_TUPLE);
                self.nat(ps.len() as u64);
                ps.iter().for_each(|p| self.pattern(p));
            }
        }
    }

    fn operand(&mut self, o: &Operand) {
        match o {
            Operand::Var(v) => {
                self.nat(0);
                self.string(v);
            }
            Operand::Atom(a) => {
                self.nat(1);
                self.nat(a.0 as u64);
            }
            Operand::Const(s) => {
                self.nat(2);
                self.string(s);
            }
        }
    }

    fn constraint(&mut self, c: &EqConstraint) {
        self.nat(c.literals.len() as u64);
        for l in &c.literals {
            self.bit(l.equal);
            self.operand(&l.lhs);
            self.operand(&l.rhs);
        }
    }

    fn finish(self) -> SetBuilderCode {
        let mut n = BigUint::from(1u8);
        for b in self.bits {
            n <<= 1;
            if b {
                n |= BigUint::from(1u8);
            }
        }
        SetBuilderCode(n)
    }
}

struct Reader {
    bits: Vec<bool>,
    pos: usize,
}

impl Reader {
    fn new(code: &SetBuilderCode) -> Option<Reader> {
        let n = &code.0;
        let width = n.bits() as usize;
        if width == 0 {
            return None;
        }
        let bits = (0..width - 1).rev().map(|i| n.bit(i as u64)).collect();
        Some(Reader { bits, pos: 0 })
    }

    fn bit(&mut self) -> Option<bool> {
        let b = *self.bits.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }

    fn nat(&mut self) -> Option<u64> {
        let mut zeros = 0;
        while !self.bit()? {
            zeros += 1;
            if zeros > 63 {
                return None;
            }
        }
        let mut m: u64 = 1;
        for _ in 0..zeros {
            m = (m << 1) | self.bit()? as u64;
        }
        Some(m - 1)
    }

    fn string(&mut self) -> Option<String> {
        let len = self.nat()? as usize;
        if len > self.bits.len() {
            return None;
        }
        let mut bytes = Vec::with_capacity(len);
        for _ in 0..len {
            let mut b = 0u8;
            for _ in 0..8 {
                b = (b << 1) | self.bit()? as u8;
            }
            bytes.push(b);
        }
        String::from_utf8(bytes).ok()
    }

    fn pattern(&mut self, depth: usize) -> Option<Pattern> {
        if depth > 4096 {
            return None;
        }
        Some(match self.nat()? {
            TAG_CONST => Pattern::Const(self.string()?),
            TAG_ATOM => Pattern::Atom(Atom(u32::try_from(self.nat()?).ok()?)),
            TAG_VAR => Pattern::Var(self.string()?),
            TAG_TUPLE => {
                let n = self.nat()? as usize;
                if n > self.bits.len() {
                    return None;
                }
                Pattern::Tuple((0..n).map(|_| self.pattern(depth + 1)).collect::<Option<_>>()?)
            }
            _ => return None,
        })
    }

    fn operand(&mut self) -> Option<Operand> {
        Some(match self.nat()? {
            0 => Operand::Var(self.string()?),
            1 => Operand::Atom(Atom(u32::try_from(self.nat()?).ok()?)),
            2 => Operand::Const(self.string()?),
            _ => return None,
        })
    }

    fn constraint(&mut self) -> Option<EqConstraint> {
        let n = self.nat()? as usize;
        if n > self.bits.len() {
            return None;
        }
        let mut literals = Vec::with_capacity(n);
        for _ in 0..n {
            let equal = self.bit()?;
            let lhs = self.operand()?;
            let rhs = self.operand()?;
            literals.push(Literal { lhs, rhs, equal });
        }
        Some(EqConstraint { literals })
    }

    fn done(&self) -> bool {
        self.pos == self.bits.len()
    }
}

/// Encodes a descriptor list.
pub fn encode(ds: &[OrbitDescriptor]) -> SetBuilderCode {
    let mut w = Bits::default();
    w.nat(KIND_LIST);
    w.nat(ds.len() as u64);
    for d in ds {
        w.pattern(&d.pattern);
        w.constraint(&d.constraint);
    }
    w.finish()
}

/// Inverse of [`encode`]; rejects every code outside its image.
pub fn decode(code: &SetBuilderCode) -> Result<Vec<OrbitDescriptor>, OrbitError> {
    let err = || OrbitError::NotACode(code.to_string());
    let mut r = Reader::new(code).ok_or_else(err)?;
    if r.nat().ok_or_else(err)? != KIND_LIST {
        return Err(err());
    }
    let n = r.nat().ok_or_else(err)? as usize;
    if n > r.bits.len() {
        return Err(err());
    }
    let mut ds = Vec::with_capacity(n);
    for _ in 0..n {
        let pattern = r.pattern(0).ok_or_else(err)?;
        let constraint = r.constraint().ok_or_else(err)?;
        ds.push(OrbitDescriptor { pattern, constraint });
    }
    if !r.done() {
        return Err(err());
    }
    Ok(ds)
}

/// Encodes a triple as the set-of-sets `{{s},{s,a},{s,a,t}}` (each inner set
/// written as a list) followed by the shared constraint.
pub fn encode_triple(d: &TripleDescriptor) -> SetBuilderCode {
    let mut w = Bits::default();
    w.nat(KIND_TRIPLE);
    w.nat(3);
    let parts = [&d.source, &d.action, &d.target];
    for k in 1..=3 {
        w.nat(k as u64);
        parts[..k].iter().for_each(|p| w.pattern(p));
    }
    w.constraint(&d.constraint);
    w.finish()
}

/// Inverse of [`encode_triple`].
pub fn decode_triple(code: &SetBuilderCode) -> Result<TripleDescriptor, OrbitError> {
    let err = || OrbitError::NotATripleCode(code.to_string());
    let mut r = Reader::new(code).ok_or_else(err)?;
    if r.nat().ok_or_else(err)? != KIND_TRIPLE || r.nat().ok_or_else(err)? != 3 {
        return Err(err());
    }
    let mut sets: Vec<Vec<Pattern>> = Vec::new();
    for k in 1..=3u64 {
        if r.nat().ok_or_else(err)? != k {
            return Err(err());
        }
        sets.push((0..k).map(|_| r.pattern(0)).collect::<Option<_>>().ok_or_else(err)?);
    }
    // The inner sets must form a chain {s} ⊂ {s,a} ⊂ {s,a,t}.
    if sets[1][0] != sets[0][0] || sets[2][0] != sets[0][0] || sets[2][1] != sets[1][1] {
        return Err(err());
    }
    let constraint = r.constraint().ok_or_else(err)?;
    if !r.done() {
        return Err(err());
    }
    let target = sets[2][2].clone();
    let action = sets[1][1].clone();
    let source = sets[0][0].clone();
    Ok(TripleDescriptor { source, action, target, constraint })
}

/// Which component of a triple to project out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Source,
    Action,
    Target,
}

/// The single-descriptor code of one component of a triple code, keeping the
/// triple's constraint (its other variables become existential).
pub fn project(code: &SetBuilderCode, which: Component) -> Result<SetBuilderCode, OrbitError> {
    let t = decode_triple(code)?;
    let d = match which {
        Component::Source => t.source_descriptor(),
        Component::Action => t.action_descriptor(),
        Component::Target => t.target_descriptor(),
    };
    Ok(encode(&[d]))
}
