//! Incremental instantiation across shots.
//!
//! Each shot runs three phases over the session state:
//!
//! 1. *Desimplification*: simplifications that the new facts no longer
//!    justify are undone. Removed body atoms go back into live rules, and
//!    deleted rules move back into the working set `NR`.
//! 2. *Delta instantiation*: semi-naive matching generates every instance
//!    whose positive body uses an atom that just became available. Fresh
//!    instances are simplified with types 1 and 3.
//! 3. *Finalization*: the working set is simplified to a fixpoint with all
//!    three types and then committed.
//!
//! Phases 1 and 2 alternate until neither adds anything.
//!
//! A simplification is valid for a shot when each atom that licensed it is
//! *grounded*: an input fact of the shot, or the head of a live fact rule
//! whose own removed atoms are grounded. At the start of every shot, each
//! licensing atom that is not grounded is put into `OF`, so stale
//! simplifications are undone no matter which earlier shot introduced them.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::time::Instant;

use crate::ast::{
    apply_substitution, check_safety, Atom, FactSet, Program, Rule, Substitution, Symbol, Term,
};
use crate::error::{Error, Result};
use crate::ground::{
    DeletedStore, DeletionKind, GroundProgram, HomId, RuleSet, SimplifiedRule,
    DEFAULT_INSTANCE_BOUND,
};
use crate::oracle::{self, simplify_rule, SimplTypes};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Overgrounding with tailored simplification.
    #[default]
    Tailored,
    /// Overgrounding without any simplification.
    Plain,
    /// Recompute the least tailored embedding from scratch every shot.
    Scratch,
}

/// Which facts license type-1 and type-3 simplifications.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SimplifyAgainst {
    /// The facts of the current shot.
    #[default]
    CurrentF,
    /// Only facts present in every shot so far.
    Pf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineConfig {
    pub mode: Mode,
    pub simplify_against: SimplifyAgainst,
    /// Cap on live plus deleted rules. Exceeding it aborts the shot.
    pub max_rules: Option<usize>,
}

/// Counters for one shot.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ShotStats {
    pub shot_index: usize,
    /// Newly instantiated rules that made it into the program.
    pub rules_added: usize,
    /// Deleted rules brought back plus live rules that got atoms restored.
    pub rules_restored: usize,
    /// Rules put into the deleted store during the shot.
    pub rules_deleted: usize,
    /// Body atoms removed from rules committed during the shot.
    pub atoms_removed_type3: usize,
    pub live_rule_count: usize,
    pub deleted_rule_count: usize,
    pub grounding_time_ms: f64,
}

/// Ground atoms indexed by predicate, for matching.
#[derive(Clone, Debug, Default)]
pub struct AtomIndex {
    by_pred: HashMap<(Symbol, usize), HashSet<Atom>>,
    len: usize,
}

impl AtomIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: Atom) -> bool {
        let fresh = self
            .by_pred
            .entry((a.predicate.clone(), a.arity()))
            .or_default()
            .insert(a);
        self.len += usize::from(fresh);
        fresh
    }

    pub fn remove(&mut self, a: &Atom) -> bool {
        let gone = self
            .by_pred
            .get_mut(&(a.predicate.clone(), a.arity()))
            .is_some_and(|s| s.remove(a));
        self.len -= usize::from(gone);
        gone
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.by_pred
            .get(&(a.predicate.clone(), a.arity()))
            .is_some_and(|s| s.contains(a))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn candidates(&self, pattern: &Atom) -> impl Iterator<Item = &Atom> {
        self.by_pred
            .get(&(pattern.predicate.clone(), pattern.arity()))
            .into_iter()
            .flatten()
    }
}

impl FromIterator<Atom> for AtomIndex {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        let mut idx = AtomIndex::new();
        for a in iter {
            idx.insert(a);
        }
        idx
    }
}

fn unify(pattern: &Atom, ground: &Atom, sub: &Substitution) -> Option<Substitution> {
    if pattern.predicate != ground.predicate || pattern.arity() != ground.arity() {
        return None;
    }
    let mut out = sub.clone();
    for (p, g) in pattern.args.iter().zip(&ground.args) {
        let c = g.symbol();
        match p {
            Term::Const(k) if k != c => return None,
            Term::Const(_) => {}
            Term::Var(v) => match out.get(v) {
                Some(x) if x != c => return None,
                Some(_) => {}
                None => {
                    out.insert(v.clone(), c.clone());
                }
            },
        }
    }
    Some(out)
}

fn extend_matches(
    rest: &[&Atom],
    avail: &AtomIndex,
    sub: Substitution,
    out: &mut Vec<Substitution>,
) {
    let Some((first, rest)) = rest.split_first() else {
        out.push(sub);
        return;
    };
    for g in avail.candidates(first) {
        if let Some(s) = unify(first, g, &sub) {
            extend_matches(rest, avail, s, out);
        }
    }
}

/// Ground instances of `rule` whose positive body lies in `avail` and
/// contains at least one atom of `delta`. `delta` must be a subset of
/// `avail`. Rules with an empty positive body never match.
pub fn get_instances(rule: &Rule, avail: &AtomIndex, delta: &BTreeSet<Atom>) -> BTreeSet<Rule> {
    let pos: Vec<&Atom> = rule.pos.iter().collect();
    let mut out = BTreeSet::new();
    for (i, pattern) in pos.iter().enumerate() {
        let rest: Vec<&Atom> = pos
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, a)| *a)
            .collect();
        for d in delta {
            let Some(sub) = unify(pattern, d, &Substitution::new()) else {
                continue;
            };
            let mut subs = Vec::new();
            extend_matches(&rest, avail, sub, &mut subs);
            for s in subs {
                // safety guarantees the positive body binds every variable
                out.insert(apply_substitution(rule, &s).expect("safe rule"));
            }
        }
    }
    out
}

/// Per-shot working sets.
#[derive(Clone, Debug, Default)]
pub struct ShotWorkset {
    /// `NF`: facts not seen in any earlier shot.
    pub nf: BTreeSet<Atom>,
    /// `OF`: atoms no longer certainly true.
    pub of: BTreeSet<Atom>,
    /// `NR`: rules restored or generated during the shot.
    pub nr: BTreeMap<HomId, SimplifiedRule>,
    /// Members of `nr` that came back from the deleted store.
    pub restored: HashSet<HomId>,
    /// Facts that license simplifications in this shot.
    pub context_facts: BTreeSet<Atom>,
    grounded: HashSet<Atom>,
    of_queue: Vec<Atom>,
    new_heads: Vec<Atom>,
    delta: BTreeSet<Atom>,
    desimplified: HashSet<HomId>,
    deleted_now: usize,
    restored_now: usize,
}

impl ShotWorkset {
    fn push_of(&mut self, a: Atom) -> bool {
        if self.of.insert(a.clone()) {
            self.of_queue.push(a);
            true
        } else {
            false
        }
    }

    fn add_nr(&mut self, s: SimplifiedRule, restored: bool) {
        let id = s.hom().clone();
        for h in s.head() {
            self.new_heads.push(h.clone());
            self.delta.insert(h.clone());
        }
        if restored {
            self.restored.insert(id.clone());
        }
        self.nr.insert(id, s);
    }
}

/// State of an incremental grounding session.
#[derive(Clone, Debug)]
pub struct Session {
    program: Program,
    universe: BTreeSet<Symbol>,
    signature: BTreeMap<Symbol, usize>,
    config: EngineConfig,
    dg: GroundProgram,
    deleted: DeletedStore,
    af: BTreeSet<Atom>,
    pf: BTreeSet<Atom>,
    avail: AtomIndex,
    shot_index: usize,
    seeded: bool,
}

impl Session {
    /// Starts an empty session. Fails if some rule is unsafe.
    pub fn new(program: Program, config: EngineConfig) -> Result<Self> {
        for (i, r) in program.rules.iter().enumerate() {
            if let Some(v) = check_safety(r, i).into_iter().next() {
                return Err(Error::Unsafe {
                    variable: v.variable.to_string(),
                    rule: r.to_string(),
                });
            }
        }
        Ok(Session {
            universe: program.universe.clone(),
            signature: program.signature(),
            program,
            config,
            dg: GroundProgram::new(),
            deleted: DeletedStore::new(),
            af: BTreeSet::new(),
            pf: BTreeSet::new(),
            avail: AtomIndex::new(),
            shot_index: 0,
            seeded: false,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn source(&self) -> &Program {
        &self.program
    }

    /// The current ground program `G_i`, without the input facts.
    pub fn program(&self) -> &GroundProgram {
        &self.dg
    }

    pub fn deleted(&self) -> &DeletedStore {
        &self.deleted
    }

    pub fn accumulated_facts(&self) -> &BTreeSet<Atom> {
        &self.af
    }

    pub fn persistent_facts(&self) -> &BTreeSet<Atom> {
        &self.pf
    }

    pub fn shot_index(&self) -> usize {
        self.shot_index
    }

    /// Constants of the program and of every fact set seen so far.
    pub fn universe(&self) -> &BTreeSet<Symbol> {
        &self.universe
    }

    /// The source program over the session universe, for the oracles.
    pub fn verification_program(&self) -> Program {
        self.program
            .clone()
            .with_universe(self.universe.iter().cloned())
    }

    /// `G_i ∪ F` as plain ground rules (current bodies).
    pub fn ground_with_facts(&self, facts: &FactSet) -> Vec<Rule> {
        let mut rules = oracle::as_ground_rules(self.dg.iter());
        rules.extend(facts.as_rules());
        rules
    }

    fn check_facts(&self, facts: &FactSet) -> Result<()> {
        for a in &facts.atoms {
            if let Some(&n) = self.signature.get(&a.predicate) {
                if n != a.arity() {
                    return Err(Error::ArityMismatch {
                        predicate: a.predicate.to_string(),
                        expected: n,
                        found: a.arity(),
                        span: None,
                    });
                }
            }
        }
        Ok(())
    }

    fn check_cap(&self, ws: &ShotWorkset) -> Result<()> {
        if let Some(limit) = self.config.max_rules {
            if self.dg.len() + self.deleted.len() + ws.nr.len() > limit {
                return Err(Error::InstanceBound { limit });
            }
        }
        Ok(())
    }

    fn simplifies(&self) -> bool {
        self.config.mode == Mode::Tailored
    }

    /// Processes one shot and returns its statistics. On error the session
    /// is left in an unspecified state and should be discarded.
    pub fn incr_inst(&mut self, facts: &FactSet) -> Result<ShotStats> {
        self.check_facts(facts)?;
        let start = Instant::now();
        let mut stats = if self.config.mode == Mode::Scratch {
            self.scratch_shot(facts)?
        } else {
            let mut ws = self.begin_shot(facts);
            loop {
                let desimplified = self.desimpl_step(&mut ws);
                let grown = self.delta_inst_step(&mut ws)?;
                if !desimplified && !grown {
                    break;
                }
            }
            self.finalize_shot(ws)?
        };
        stats.grounding_time_ms = start.elapsed().as_secs_f64() * 1000.0;
        Ok(stats)
    }

    /// Sets up `NF` and `OF`, updates `AF` and `PF`.
    pub fn begin_shot(&mut self, facts: &FactSet) -> ShotWorkset {
        self.shot_index += 1;
        self.universe.extend(facts.constants());
        let f = &facts.atoms;
        let nf: BTreeSet<Atom> = f.difference(&self.af).cloned().collect();
        let stale_pf: Vec<Atom> = self.pf.difference(f).cloned().collect();
        self.pf = if self.shot_index == 1 {
            f.clone()
        } else {
            self.pf.intersection(f).cloned().collect()
        };
        self.af.extend(f.iter().cloned());

        let context_facts = match self.config.simplify_against {
            SimplifyAgainst::CurrentF => f.clone(),
            SimplifyAgainst::Pf => self.pf.clone(),
        };
        let mut ws = ShotWorkset {
            delta: nf.clone(),
            new_heads: nf.iter().cloned().collect(),
            nf,
            grounded: self.grounded_facts(&context_facts),
            context_facts,
            ..ShotWorkset::default()
        };
        if self.simplifies() {
            let mut seed: BTreeSet<Atom> = stale_pf.into_iter().collect();
            seed.extend(self.dg.removed_atoms().cloned());
            seed.extend(self.deleted.negated_fact_atoms());
            for a in seed {
                if !ws.grounded.contains(&a) {
                    ws.push_of(a);
                }
            }
        }
        ws
    }

    /// Least set containing `base` and the head of every live fact rule
    /// whose removed atoms are all in the set.
    fn grounded_facts(&self, base: &BTreeSet<Atom>) -> HashSet<Atom> {
        let mut grounded: HashSet<Atom> = base.iter().cloned().collect();
        let mut pending: Vec<&SimplifiedRule> = self
            .dg
            .iter()
            .filter(|s| s.is_fact() && !grounded.contains(s.fact_atom().unwrap()))
            .collect();
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

    /// Undoes invalidated simplifications. Returns whether `NR` or `OF` grew.
    pub fn desimpl_step(&mut self, ws: &mut ShotWorkset) -> bool {
        if !self.simplifies() {
            return false;
        }
        let mut changed = false;
        while !ws.new_heads.is_empty() || !ws.of_queue.is_empty() {
            // deleted rules whose positive body became derivable
            while let Some(a) = ws.new_heads.pop() {
                for id in self.deleted.justified_by(&a, DeletionKind::UnderivableBody) {
                    let (hom, _) = self.deleted.remove(&id).unwrap();
                    ws.add_nr(SimplifiedRule::full(hom), true);
                    changed = true;
                }
            }
            while let Some(a) = ws.of_queue.pop() {
                changed = true;
                for id in self.deleted.justified_by(&a, DeletionKind::NegatedFact) {
                    let (hom, _) = self.deleted.remove(&id).unwrap();
                    ws.add_nr(SimplifiedRule::full(hom), true);
                }
                for id in self.dg.with_removed(&a) {
                    let out = self.dg.restore_atom(&id, &a).expect("indexed removal");
                    ws.desimplified.insert(id.clone());
                    if out.was_fact && out.fact_lost {
                        let h = id.head.iter().next().unwrap();
                        if !ws.grounded.contains(h) {
                            ws.push_of(h.clone());
                        }
                    }
                }
            }
        }
        changed
    }

    /// Generates instances driven by the pending delta atoms until no new
    /// rule appears. Returns whether `NR` grew.
    pub fn delta_inst_step(&mut self, ws: &mut ShotWorkset) -> Result<bool> {
        let before = ws.nr.len();
        let types = if self.simplifies() {
            Some(SimplTypes::NO_UNDERIVABLE)
        } else {
            None
        };
        let mut candidates: BTreeSet<Rule> = BTreeSet::new();
        if !self.seeded {
            self.seeded = true;
            candidates.extend(
                self.program
                    .rules
                    .iter()
                    .filter(|r| r.pos.is_empty())
                    .cloned(),
            );
        }
        loop {
            let delta: BTreeSet<Atom> = std::mem::take(&mut ws.delta)
                .into_iter()
                .filter(|a| self.avail.insert(a.clone()))
                .collect();
            if !delta.is_empty() {
                for rule in &self.program.rules {
                    candidates.extend(get_instances(rule, &self.avail, &delta));
                }
            }
            candidates.retain(|g| {
                !self.dg.contains(g) && !self.deleted.contains(g) && !ws.nr.contains_key(g)
            });
            if candidates.is_empty() {
                break;
            }
            // a fixed context per round keeps the outcome independent of order
            let nr_facts: HashSet<Atom> = ws
                .nr
                .values()
                .filter_map(|s| s.fact_atom().cloned())
                .collect();
            let is_fact = |a: &Atom| ws.context_facts.contains(a) || nr_facts.contains(a);
            let mut kept = Vec::new();
            for g in std::mem::take(&mut candidates) {
                let s = SimplifiedRule::full(g);
                match types {
                    None => kept.push(s),
                    Some(t) => match simplify_rule(&s, is_fact, |_| true, t) {
                        Ok(s) => kept.push(s),
                        Err(why) => {
                            self.deleted.insert(s.hom().clone(), why);
                            ws.deleted_now += 1;
                        }
                    },
                }
            }
            for s in kept {
                ws.add_nr(s, false);
            }
            self.check_cap(ws)?;
        }
        Ok(ws.nr.len() > before)
    }

    /// Simplifies `NR` to a fixpoint against the live program, `NR` itself
    /// and the shot's facts, then commits the survivors.
    pub fn finalize_shot(&mut self, mut ws: ShotWorkset) -> Result<ShotStats> {
        let mut nr = std::mem::take(&mut ws.nr);
        let mut dropped_heads = Vec::new();
        if self.simplifies() {
            loop {
                let nr_facts: HashSet<Atom> =
                    nr.values().filter_map(|s| s.fact_atom().cloned()).collect();
                let nr_heads: HashSet<&Atom> = nr.values().flat_map(|s| s.head()).collect();
                let is_fact = |a: &Atom| {
                    ws.context_facts.contains(a) || nr_facts.contains(a) || self.dg.is_fact(a)
                };
                let is_head =
                    |a: &Atom| nr_heads.contains(a) || self.dg.is_head(a) || self.af.contains(a);
                let mut next = BTreeMap::new();
                let mut dropped = Vec::new();
                let mut changed = false;
                for (id, s) in &nr {
                    let types = if ws.restored.contains(id) {
                        SimplTypes {
                            remove_facts: false,
                            ..SimplTypes::ALL
                        }
                    } else {
                        SimplTypes::ALL
                    };
                    match simplify_rule(s, is_fact, is_head, types) {
                        Ok(t) => {
                            changed |= &t != s;
                            next.insert(id.clone(), t);
                        }
                        Err(why) => {
                            changed = true;
                            dropped.push((id.clone(), why));
                        }
                    }
                }
                for (id, why) in dropped {
                    dropped_heads.extend(id.head.iter().cloned());
                    self.deleted.insert(id, why);
                    ws.deleted_now += 1;
                }
                nr = next;
                if !changed {
                    break;
                }
            }
        }
        let mut stats = ShotStats {
            shot_index: self.shot_index,
            ..ShotStats::default()
        };
        for (id, s) in nr {
            if ws.restored.contains(&id) {
                ws.restored_now += 1;
            } else {
                stats.rules_added += 1;
            }
            stats.atoms_removed_type3 += s.removed().count();
            self.dg.insert(s);
        }
        for h in dropped_heads {
            if !self.dg.is_head(&h) && !self.af.contains(&h) {
                self.avail.remove(&h);
            }
        }
        self.check_cap(&ws)?;
        stats.rules_restored = ws.restored_now + ws.desimplified.len();
        stats.rules_deleted = ws.deleted_now;
        stats.live_rule_count = self.dg.len();
        stats.deleted_rule_count = self.deleted.len();
        Ok(stats)
    }

    fn scratch_shot(&mut self, facts: &FactSet) -> Result<ShotStats> {
        self.shot_index += 1;
        self.universe.extend(facts.constants());
        self.af.extend(facts.atoms.iter().cloned());
        self.pf = if self.shot_index == 1 {
            facts.atoms.clone()
        } else {
            self.pf.intersection(&facts.atoms).cloned().collect()
        };
        let limit = self.config.max_rules.unwrap_or(DEFAULT_INSTANCE_BOUND);
        let inst = oracle::inst_fixpoint(&self.program, facts, limit)?;
        let mut all: RuleSet = inst.iter().cloned().map(SimplifiedRule::full).collect();
        all.extend(facts.as_rules().map(SimplifiedRule::full));
        let lte = oracle::simpl_fixpoint(&all);
        let kept: Vec<SimplifiedRule> = lte
            .into_iter()
            .filter(|s| inst.contains(s.hom().as_ref()))
            .collect();
        let added = kept.iter().filter(|s| !self.dg.contains(s.hom())).count();
        let deleted = inst.len() - kept.len();
        self.dg = GroundProgram::from_rules(kept);
        Ok(ShotStats {
            shot_index: self.shot_index,
            rules_added: added,
            rules_restored: 0,
            rules_deleted: deleted,
            atoms_removed_type3: self.dg.iter().map(|s| s.removed().count()).sum(),
            live_rule_count: self.dg.len(),
            deleted_rule_count: 0,
            grounding_time_ms: 0.0,
        })
    }
}
