//! Simplified ground rules and the relations between sets of them.
//!
//! A [`SimplifiedRule`] is a ground rule from the theoretical instantiation
//! (its *homologous* rule) together with the subset of its positive body that
//! is still present. Only positive body atoms are ever removed, and a removed
//! atom is always licensed by itself being a fact, so the removed set and its
//! justifications are both recoverable from `hom.pos \ pos`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::ast::{ground_instances, write_rule, Atom, FactSet, Program, Rule};
use crate::error::{Error, Result};

/// Identity of a homologous ground rule: structural equality of the rule.
pub type HomId = Arc<Rule>;

/// A set of simplified rules, ordered canonically.
pub type RuleSet = BTreeSet<SimplifiedRule>;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimplifiedRule {
    hom: HomId,
    pos: BTreeSet<Atom>,
}

impl SimplifiedRule {
    /// The unsimplified rule, `hom(s) = s`.
    pub fn full(hom: impl Into<HomId>) -> Self {
        let hom = hom.into();
        let pos = hom.pos.clone();
        SimplifiedRule { hom, pos }
    }

    /// # Panics
    /// If some atom of `removed` is not in the positive body of `hom`.
    pub fn with_removed(hom: impl Into<HomId>, removed: impl IntoIterator<Item = Atom>) -> Self {
        let mut s = SimplifiedRule::full(hom);
        for a in removed {
            assert!(
                s.remove_atom(&a),
                "{a} is not in the positive body of {}",
                s.hom
            );
        }
        s
    }

    pub fn hom(&self) -> &HomId {
        &self.hom
    }

    pub fn head(&self) -> &BTreeSet<Atom> {
        &self.hom.head
    }

    /// Current positive body, `B+(s)`.
    pub fn pos(&self) -> &BTreeSet<Atom> {
        &self.pos
    }

    /// Negative body; never simplified, so always equal to that of `hom`.
    pub fn neg(&self) -> &BTreeSet<Atom> {
        &self.hom.neg
    }

    /// `B*(s)`: the positive atoms of `hom` no longer in the body.
    pub fn removed(&self) -> impl Iterator<Item = &Atom> {
        self.hom.pos.iter().filter(|a| !self.pos.contains(*a))
    }

    pub fn is_simplified(&self) -> bool {
        self.pos.len() != self.hom.pos.len()
    }

    /// Singleton head and empty current body.
    pub fn is_fact(&self) -> bool {
        self.hom.head.len() == 1 && self.pos.is_empty() && self.hom.neg.is_empty()
    }

    pub fn fact_atom(&self) -> Option<&Atom> {
        if self.is_fact() {
            self.hom.head.iter().next()
        } else {
            None
        }
    }

    /// The rule as it currently reads.
    pub fn current(&self) -> Rule {
        Rule {
            head: self.hom.head.clone(),
            pos: self.pos.clone(),
            neg: self.hom.neg.clone(),
        }
    }

    /// Moves `atom` from the body to `B*`. Returns false if it was not there.
    pub fn remove_atom(&mut self, atom: &Atom) -> bool {
        self.pos.remove(atom)
    }

    /// Moves `atom` from `B*` back into the body. Returns false if it was not removed.
    pub fn restore_atom(&mut self, atom: &Atom) -> bool {
        self.hom.pos.contains(atom) && self.pos.insert(atom.clone())
    }
}

impl fmt::Display for SimplifiedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_rule(f, &self.hom.head, &self.pos, &self.hom.neg)
    }
}

impl fmt::Debug for SimplifiedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")?;
        if self.is_simplified() {
            f.write_str(" [-")?;
            for (i, a) in self.removed().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str("]")?;
        }
        Ok(())
    }
}

impl From<Rule> for SimplifiedRule {
    fn from(r: Rule) -> Self {
        SimplifiedRule::full(r)
    }
}

/// Which simplification removed a rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DeletionKind {
    /// Type 1: some `not a` in the body with `a` certainly true.
    NegatedFact,
    /// Type 2: some positive body atom that cannot be derived.
    UnderivableBody,
}

/// Why a rule was deleted: the kind plus the atoms that licensed it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Deletion {
    pub kind: DeletionKind,
    pub atoms: BTreeSet<Atom>,
}

impl Deletion {
    pub fn type_number(&self) -> u8 {
        match self.kind {
            DeletionKind::NegatedFact => 1,
            DeletionKind::UnderivableBody => 2,
        }
    }
}

pub fn heads<'a>(rules: impl IntoIterator<Item = &'a SimplifiedRule>) -> BTreeSet<Atom> {
    rules
        .into_iter()
        .flat_map(|s| s.head().iter().cloned())
        .collect()
}

/// `Facts(R)` over current bodies.
pub fn facts<'a>(rules: impl IntoIterator<Item = &'a SimplifiedRule>) -> BTreeSet<Atom> {
    rules
        .into_iter()
        .filter_map(|s| s.fact_atom().cloned())
        .collect()
}

/// Facts of `rules` that have a well-founded derivation: a fact rule counts
/// only once every atom removed from its body is itself a grounded fact.
/// Self-supporting cycles such as `a :- [b]. b :- [a].` are excluded.
pub fn grounded_facts<'a>(rules: impl IntoIterator<Item = &'a SimplifiedRule>) -> BTreeSet<Atom> {
    let candidates: Vec<&SimplifiedRule> = rules.into_iter().filter(|s| s.is_fact()).collect();
    let mut grounded = BTreeSet::new();
    let mut pending: Vec<&SimplifiedRule> = candidates;
    loop {
        let before = grounded.len();
        pending.retain(|s| {
            if s.removed().all(|a| grounded.contains(a)) {
                grounded.insert(s.fact_atom().unwrap().clone());
                false
            } else {
                true
            }
        });
        if grounded.len() == before {
            return grounded;
        }
    }
}

/// `S ⊑ R`: every rule of `S` has a hom-mate in `R` whose body contains its body.
pub fn is_simplified_subset(s: &RuleSet, r: &RuleSet) -> bool {
    let mut by_hom: HashMap<&Rule, Vec<&SimplifiedRule>> = HashMap::new();
    for x in r {
        by_hom.entry(x.hom()).or_default().push(x);
    }
    s.iter().all(|x| {
        by_hom
            .get(x.hom().as_ref())
            .is_some_and(|ys| ys.iter().any(|y| x.pos().is_subset(y.pos())))
    })
}

/// `R ⊓ Q`: one rule per pair of hom-mates, with the intersection of their bodies.
pub fn simplified_intersection(r: &RuleSet, q: &RuleSet) -> RuleSet {
    let mut by_hom: HashMap<&Rule, Vec<&SimplifiedRule>> = HashMap::new();
    for x in q {
        by_hom.entry(x.hom()).or_default().push(x);
    }
    let mut out = RuleSet::new();
    for x in r {
        if let Some(ys) = by_hom.get(x.hom().as_ref()) {
            for y in ys {
                out.insert(SimplifiedRule {
                    hom: x.hom.clone(),
                    pos: x.pos.intersection(&y.pos).cloned().collect(),
                });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Embedding {
    pub by_body: bool,
    pub by_head: bool,
    pub embeds: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TailorCase {
    /// Case 1: the rule is embedded.
    Embedded = 1,
    /// Case 2: a simplified version is present and every removed atom is a fact.
    SimplifiedVersion = 2,
    /// Case 3: some negated body atom is a fact.
    NegatedFact = 3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tailoring {
    pub tailors: bool,
    /// Lowest applicable case.
    pub case: Option<TailorCase>,
}

/// Precomputed views of a rule set for repeated embedding/tailoring queries.
pub struct RuleSetView<'a> {
    by_hom: HashMap<&'a Rule, Vec<&'a SimplifiedRule>>,
    heads: HashSet<&'a Atom>,
    facts: BTreeSet<Atom>,
}

impl<'a> RuleSetView<'a> {
    pub fn new(rules: impl IntoIterator<Item = &'a SimplifiedRule> + Clone) -> Self {
        let mut by_hom: HashMap<&Rule, Vec<&SimplifiedRule>> = HashMap::new();
        let mut heads = HashSet::new();
        for s in rules.clone() {
            by_hom.entry(s.hom().as_ref()).or_default().push(s);
            heads.extend(s.head());
        }
        RuleSetView {
            by_hom,
            heads,
            facts: grounded_facts(rules),
        }
    }

    pub fn is_head(&self, a: &Atom) -> bool {
        self.heads.contains(a)
    }

    /// `R ⊢ a` for an atom: the set holds a (well-founded) fact for it.
    pub fn is_fact(&self, a: &Atom) -> bool {
        self.facts.contains(a)
    }

    pub fn embeds(&self, r: &Rule) -> Embedding {
        let by_body = r.pos.iter().all(|a| self.heads.contains(a));
        let by_head = self
            .by_hom
            .get(r)
            .is_some_and(|v| v.iter().any(|s| !s.is_simplified()));
        Embedding {
            by_body,
            by_head,
            embeds: !by_body || by_head,
        }
    }

    pub fn tailors(&self, r: &Rule) -> Tailoring {
        let case = if self.embeds(r).embeds {
            Some(TailorCase::Embedded)
        } else if self
            .by_hom
            .get(r)
            .is_some_and(|v| v.iter().any(|s| s.removed().all(|a| self.is_fact(a))))
        {
            Some(TailorCase::SimplifiedVersion)
        } else if r.neg.iter().any(|a| self.is_fact(a)) {
            Some(TailorCase::NegatedFact)
        } else {
            None
        };
        Tailoring {
            tailors: case.is_some(),
            case,
        }
    }
}

pub fn embeds(rules: &RuleSet, r: &Rule) -> Embedding {
    RuleSetView::new(rules).embeds(r)
}

pub fn tailors(rules: &RuleSet, r: &Rule) -> Tailoring {
    RuleSetView::new(rules).tailors(r)
}

/// Outcome of checking a rule set against every rule of `grnd(P) ∪ F`.
#[derive(Clone, Debug)]
pub struct EmbeddingReport {
    pub holds: bool,
    /// Rules that failed the check (at most [`MAX_WITNESSES`]).
    pub witnesses: Vec<Rule>,
    pub checked: usize,
}

pub const MAX_WITNESSES: usize = 16;

/// Default cap on the number of ground rules enumerated by checkers and oracles.
pub const DEFAULT_INSTANCE_BOUND: usize = 1_000_000;

/// Enumerates `grnd(P) ∪ F` over `U = universe(P) ∪ constants(F)`, refusing
/// to produce more than `limit` rules.
pub fn enumerate_grounding(
    program: &Program,
    facts: &FactSet,
    limit: usize,
) -> Result<BTreeSet<Rule>> {
    let mut universe = program.universe.clone();
    universe.extend(facts.constants());
    let mut total: usize = facts.len();
    for rule in &program.rules {
        let k = rule.variables().len() as u32;
        let n = universe.len().checked_pow(k).unwrap_or(usize::MAX);
        total = total.saturating_add(n);
        if total > limit {
            return Err(Error::InstanceBound { limit });
        }
    }
    let mut out: BTreeSet<Rule> = facts.as_rules().collect();
    for rule in &program.rules {
        out.extend(ground_instances(rule, &universe));
    }
    Ok(out)
}

fn check_all(
    rules: &RuleSet,
    program: &Program,
    facts: &FactSet,
    limit: usize,
    ok: impl Fn(&RuleSetView, &Rule) -> bool,
) -> Result<EmbeddingReport> {
    let ground = enumerate_grounding(program, facts, limit)?;
    let view = RuleSetView::new(rules);
    let mut witnesses = Vec::new();
    let mut holds = true;
    for r in &ground {
        if !ok(&view, r) {
            holds = false;
            if witnesses.len() < MAX_WITNESSES {
                witnesses.push(r.clone());
            }
        }
    }
    Ok(EmbeddingReport {
        holds,
        witnesses,
        checked: ground.len(),
    })
}

/// Whether `rules` tailors every rule of `grnd(P) ∪ F`.
pub fn verify_tailored_embedding(
    rules: &RuleSet,
    program: &Program,
    facts: &FactSet,
    limit: usize,
) -> Result<EmbeddingReport> {
    check_all(rules, program, facts, limit, |v, r| v.tailors(r).tailors)
}

/// Whether `rules` embeds every rule of `grnd(P) ∪ F` (plain embedding).
pub fn verify_embedding(
    rules: &RuleSet,
    program: &Program,
    facts: &FactSet,
    limit: usize,
) -> Result<EmbeddingReport> {
    check_all(rules, program, facts, limit, |v, r| v.embeds(r).embeds)
}

/// Ground program maintained across shots: at most one live simplified rule
/// per homologous rule, with incrementally maintained head/fact views.
#[derive(Clone, Debug, Default)]
pub struct GroundProgram {
    live: BTreeMap<HomId, SimplifiedRule>,
    by_pos: HashMap<Atom, BTreeSet<HomId>>,
    by_removed: HashMap<Atom, BTreeSet<HomId>>,
    heads: HashMap<Atom, usize>,
    facts: HashMap<Atom, usize>,
}

fn bump(map: &mut HashMap<Atom, usize>, a: &Atom) {
    *map.entry(a.clone()).or_insert(0) += 1;
}

fn drop_one(map: &mut HashMap<Atom, usize>, a: &Atom) -> bool {
    match map.get_mut(a) {
        Some(n) if *n > 1 => {
            *n -= 1;
            false
        }
        Some(_) => {
            map.remove(a);
            true
        }
        None => false,
    }
}

fn index(map: &mut HashMap<Atom, BTreeSet<HomId>>, a: &Atom, id: &HomId) {
    map.entry(a.clone()).or_default().insert(id.clone());
}

fn unindex(map: &mut HashMap<Atom, BTreeSet<HomId>>, a: &Atom, id: &HomId) {
    if let Some(set) = map.get_mut(a) {
        set.remove(id);
        if set.is_empty() {
            map.remove(a);
        }
    }
}

/// Result of restoring one removed atom into a live rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Restored {
    /// The rule was a fact before the restore.
    pub was_fact: bool,
    /// No live fact rule for the head atom remains.
    pub fact_lost: bool,
}

impl GroundProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rules(rules: impl IntoIterator<Item = SimplifiedRule>) -> Self {
        let mut g = GroundProgram::new();
        for s in rules {
            g.insert(s);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SimplifiedRule> {
        self.live.values()
    }

    pub fn get(&self, hom: &Rule) -> Option<&SimplifiedRule> {
        self.live.get(hom)
    }

    pub fn contains(&self, hom: &Rule) -> bool {
        self.live.contains_key(hom)
    }

    pub fn to_rule_set(&self) -> RuleSet {
        self.live.values().cloned().collect()
    }

    /// Inserts `s`, replacing any live rule with the same hom.
    pub fn insert(&mut self, s: SimplifiedRule) -> Option<SimplifiedRule> {
        let old = self.remove(s.hom());
        let id = s.hom().clone();
        for a in s.pos() {
            index(&mut self.by_pos, a, &id);
        }
        for a in s.removed() {
            index(&mut self.by_removed, a, &id);
        }
        for h in s.head() {
            bump(&mut self.heads, h);
        }
        if let Some(f) = s.fact_atom() {
            bump(&mut self.facts, f);
        }
        self.live.insert(id, s);
        old
    }

    pub fn remove(&mut self, hom: &Rule) -> Option<SimplifiedRule> {
        let (id, s) = self.live.remove_entry(hom)?;
        for a in s.pos() {
            unindex(&mut self.by_pos, a, &id);
        }
        for a in s.removed() {
            unindex(&mut self.by_removed, a, &id);
        }
        for h in s.head() {
            drop_one(&mut self.heads, h);
        }
        if let Some(f) = s.fact_atom() {
            drop_one(&mut self.facts, f);
        }
        Some(s)
    }

    /// Puts `atom` back into the body of the live rule `hom`.
    pub fn restore_atom(&mut self, hom: &Rule, atom: &Atom) -> Option<Restored> {
        let s = self.live.get_mut(hom)?;
        let was_fact = s.is_fact();
        if !s.restore_atom(atom) {
            return None;
        }
        let id = s.hom().clone();
        unindex(&mut self.by_removed, atom, &id);
        index(&mut self.by_pos, atom, &id);
        let mut fact_lost = false;
        if was_fact {
            let h = id.head.iter().next().unwrap();
            fact_lost = drop_one(&mut self.facts, h);
        }
        Some(Restored {
            was_fact,
            fact_lost,
        })
    }

    pub fn is_head(&self, a: &Atom) -> bool {
        self.heads.contains_key(a)
    }

    pub fn is_fact(&self, a: &Atom) -> bool {
        self.facts.contains_key(a)
    }

    /// `Heads(G)`.
    pub fn heads(&self) -> BTreeSet<Atom> {
        self.heads.keys().cloned().collect()
    }

    /// Heads of live rules with an empty current body and a singleton head.
    pub fn derived_facts(&self) -> BTreeSet<Atom> {
        self.facts.keys().cloned().collect()
    }

    /// Live rules whose `B*` contains `atom`.
    pub fn with_removed(&self, atom: &Atom) -> Vec<HomId> {
        self.by_removed
            .get(atom)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default()
    }

    /// Live rules whose current positive body contains `atom`.
    pub fn with_body_atom(&self, atom: &Atom) -> Vec<HomId> {
        self.by_pos
            .get(atom)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default()
    }

    /// Every atom currently removed from some live rule.
    pub fn removed_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.by_removed.keys()
    }

    /// Recomputes every view from `live` and compares.
    pub fn views_consistent(&self) -> bool {
        let mut fresh = GroundProgram::new();
        for s in self.live.values() {
            fresh.insert(s.clone());
        }
        fresh.heads == self.heads
            && fresh.facts == self.facts
            && fresh.by_pos == self.by_pos
            && fresh.by_removed == self.by_removed
    }
}

/// Rules removed by simplification, kept in full homologous form so that
/// they can be restored exactly.
#[derive(Clone, Debug, Default)]
pub struct DeletedStore {
    rules: BTreeMap<HomId, Deletion>,
    by_atom: HashMap<Atom, BTreeSet<HomId>>,
}

impl DeletedStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn contains(&self, hom: &Rule) -> bool {
        self.rules.contains_key(hom)
    }

    pub fn get(&self, hom: &Rule) -> Option<&Deletion> {
        self.rules.get(hom)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HomId, &Deletion)> {
        self.rules.iter()
    }

    pub fn insert(&mut self, hom: HomId, why: Deletion) {
        self.remove(&hom);
        for a in &why.atoms {
            index(&mut self.by_atom, a, &hom);
        }
        self.rules.insert(hom, why);
    }

    pub fn remove(&mut self, hom: &Rule) -> Option<(HomId, Deletion)> {
        let (id, why) = self.rules.remove_entry(hom)?;
        for a in &why.atoms {
            unindex(&mut self.by_atom, a, &id);
        }
        Some((id, why))
    }

    /// Deleted rules of the given kind whose justification mentions `atom`.
    pub fn justified_by(&self, atom: &Atom, kind: DeletionKind) -> Vec<HomId> {
        self.by_atom
            .get(atom)
            .into_iter()
            .flatten()
            .filter(|id| self.rules[*id].kind == kind)
            .cloned()
            .collect()
    }

    /// Atoms that license some type-1 deletion.
    pub fn negated_fact_atoms(&self) -> BTreeSet<Atom> {
        self.rules
            .values()
            .filter(|d| d.kind == DeletionKind::NegatedFact)
            .flat_map(|d| d.atoms.iter().cloned())
            .collect()
    }
}
