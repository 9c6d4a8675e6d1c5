//! Terms, atoms and rules of function-free disjunctive programs.
//!
//! Rules are stored set-theoretically: heads and bodies are ordered sets, so
//! two rules that differ only in literal order or repetition are the same
//! value. Ground rules are identified structurally, which is what lets the
//! simplification machinery recognise "the same theoretical rule" no matter
//! how much of its body has been removed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// An interned-by-value symbol (predicate, constant or variable name).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Variables start with an uppercase letter or an underscore.
    pub fn is_variable_name(name: &str) -> bool {
        name.chars()
            .next()
            .is_some_and(|c| c.is_ascii_uppercase() || c == '_')
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Symbol),
    Var(Symbol),
}

impl Term {
    /// Builds a term, classifying it by the usual uppercase/lowercase split.
    pub fn parse(name: &str) -> Self {
        if Symbol::is_variable_name(name) {
            Term::Var(Symbol::new(name))
        } else {
            Term::Const(Symbol::new(name))
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn symbol(&self) -> &Symbol {
        match self {
            Term::Const(s) | Term::Var(s) => s,
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol().as_str())
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<Symbol>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    /// Convenience constructor: every argument is classified with [`Term::parse`].
    pub fn from_names(predicate: &str, args: &[&str]) -> Self {
        Atom::new(predicate, args.iter().map(|a| Term::parse(a)).collect())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn variables(&self) -> impl Iterator<Item = &Symbol> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        })
    }

    pub fn constants(&self) -> impl Iterator<Item = &Symbol> {
        self.args.iter().filter_map(|t| match t {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        })
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, t) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal {
            atom,
            negated: false,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal {
            atom,
            negated: true,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        write!(f, "{}", self.atom)
    }
}

/// A (possibly non-ground) disjunctive rule `H :- B+, not B-`.
///
/// An empty head is a constraint.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub head: BTreeSet<Atom>,
    pub pos: BTreeSet<Atom>,
    pub neg: BTreeSet<Atom>,
}

impl Rule {
    pub fn new(
        head: impl IntoIterator<Item = Atom>,
        pos: impl IntoIterator<Item = Atom>,
        neg: impl IntoIterator<Item = Atom>,
    ) -> Self {
        Rule {
            head: head.into_iter().collect(),
            pos: pos.into_iter().collect(),
            neg: neg.into_iter().collect(),
        }
    }

    pub fn fact(atom: Atom) -> Self {
        Rule::new([atom], [], [])
    }

    /// Empty body and a single head atom.
    pub fn is_fact(&self) -> bool {
        self.head.len() == 1 && self.pos.is_empty() && self.neg.is_empty()
    }

    pub fn is_constraint(&self) -> bool {
        self.head.is_empty()
    }

    pub fn is_ground(&self) -> bool {
        self.atoms().all(Atom::is_ground)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.head.iter().chain(&self.pos).chain(&self.neg)
    }

    pub fn body(&self) -> impl Iterator<Item = Literal> + '_ {
        self.pos
            .iter()
            .cloned()
            .map(Literal::pos)
            .chain(self.neg.iter().cloned().map(Literal::neg))
    }

    /// Distinct variables in first-occurrence order over head, positive and
    /// negative body.
    pub fn variables(&self) -> Vec<Symbol> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for atom in self.atoms() {
            for v in atom.variables() {
                if seen.insert(v.clone()) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    pub fn constants(&self) -> BTreeSet<Symbol> {
        self.atoms().flat_map(|a| a.constants().cloned()).collect()
    }
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_rule(f, &self.head, &self.pos, &self.neg)
    }
}

/// Writes `h1 | h2 :- p1, p2, not n1.` in the canonical surface syntax.
pub(crate) fn write_rule(
    f: &mut impl fmt::Write,
    head: &BTreeSet<Atom>,
    pos: &BTreeSet<Atom>,
    neg: &BTreeSet<Atom>,
) -> fmt::Result {
    for (i, h) in head.iter().enumerate() {
        if i > 0 {
            f.write_str(" | ")?;
        }
        write!(f, "{h}")?;
    }
    if !pos.is_empty() || !neg.is_empty() || head.is_empty() {
        if head.is_empty() {
            f.write_str(":-")?;
        } else {
            f.write_str(" :-")?;
        }
        let mut first = true;
        for a in pos {
            f.write_str(if first { " " } else { ", " })?;
            write!(f, "{a}")?;
            first = false;
        }
        for a in neg {
            f.write_str(if first { " not " } else { ", not " })?;
            write!(f, "{a}")?;
            first = false;
        }
        if first {
            // body-less constraint
            f.write_str(" ")?;
        }
    }
    f.write_str(".")
}

/// A non-ground program together with its constant universe.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub universe: BTreeSet<Symbol>,
}

impl Program {
    /// Builds a program whose universe is exactly the constants of `rules`.
    pub fn new(rules: Vec<Rule>) -> Self {
        let universe = rules.iter().flat_map(Rule::constants).collect();
        Program { rules, universe }
    }

    pub fn with_universe(mut self, extra: impl IntoIterator<Item = Symbol>) -> Self {
        self.universe.extend(extra);
        self
    }

    /// Predicate name to arity for every predicate mentioned in the rules.
    pub fn signature(&self) -> BTreeMap<Symbol, usize> {
        let mut sig = BTreeMap::new();
        for atom in self.rules.iter().flat_map(Rule::atoms) {
            sig.entry(atom.predicate.clone()).or_insert(atom.arity());
        }
        sig
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// A set of ground input facts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FactSet {
    pub atoms: BTreeSet<Atom>,
}

impl FactSet {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Result<Self> {
        let atoms: BTreeSet<Atom> = atoms.into_iter().collect();
        if let Some(a) = atoms.iter().find(|a| !a.is_ground()) {
            return Err(Error::NonGroundFact {
                atom: a.to_string(),
                span: None,
            });
        }
        Ok(FactSet { atoms })
    }

    pub fn constants(&self) -> BTreeSet<Symbol> {
        self.atoms
            .iter()
            .flat_map(|a| a.constants().cloned())
            .collect()
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// The facts as body-less ground rules.
    pub fn as_rules(&self) -> impl Iterator<Item = Rule> + '_ {
        self.atoms.iter().cloned().map(Rule::fact)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafetyViolation {
    pub variable: Symbol,
    pub rule: usize,
}

/// Lists every variable of `rule` that does not occur in its positive body.
///
/// `rule_id` is only used to label the violations.
pub fn check_safety(rule: &Rule, rule_id: usize) -> Vec<SafetyViolation> {
    let bound: BTreeSet<&Symbol> = rule.pos.iter().flat_map(Atom::variables).collect();
    rule.variables()
        .into_iter()
        .filter(|v| !bound.contains(v))
        .map(|variable| SafetyViolation {
            variable,
            rule: rule_id,
        })
        .collect()
}

pub type Substitution = BTreeMap<Symbol, Symbol>;

pub(crate) fn substitute_atom(atom: &Atom, sub: &Substitution) -> Result<Atom> {
    let args =
        atom.args
            .iter()
            .map(|t| match t {
                Term::Const(_) => Ok(t.clone()),
                Term::Var(v) => sub.get(v).map(|c| Term::Const(c.clone())).ok_or_else(|| {
                    Error::MissingVariable {
                        variable: v.to_string(),
                    }
                }),
            })
            .collect::<Result<Vec<_>>>()?;
    Ok(Atom {
        predicate: atom.predicate.clone(),
        args,
    })
}

/// Applies `sub` to every atom of `rule`; atoms that collapse together are
/// merged because heads and bodies are sets.
pub fn apply_substitution(rule: &Rule, sub: &Substitution) -> Result<Rule> {
    let map = |set: &BTreeSet<Atom>| {
        set.iter()
            .map(|a| substitute_atom(a, sub))
            .collect::<Result<BTreeSet<_>>>()
    };
    Ok(Rule {
        head: map(&rule.head)?,
        pos: map(&rule.pos)?,
        neg: map(&rule.neg)?,
    })
}

/// Every ground instance of `rule` over `universe`, one per substitution of
/// its distinct variables (`|U|^k` entries, duplicates not removed).
pub fn ground_instances(rule: &Rule, universe: &BTreeSet<Symbol>) -> Vec<Rule> {
    let vars = rule.variables();
    if vars.is_empty() {
        return vec![rule.clone()];
    }
    let consts: Vec<&Symbol> = universe.iter().collect();
    if consts.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let sub: Substitution = vars
            .iter()
            .cloned()
            .zip(idx.iter().map(|&i| consts[i].clone()))
            .collect();
        out.push(apply_substitution(rule, &sub).expect("substitution covers all variables"));
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return out;
            }
            idx[pos] += 1;
            if idx[pos] < consts.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
