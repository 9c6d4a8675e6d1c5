//! Reference semantics: naive grounding, the simplification operator and its
//! fixpoints, and exact answer-set computation.
//!
//! Nothing here is incremental. The functions are written to be obviously
//! correct and are used to check the engine, and by the `scratch` run mode.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::ast::{apply_substitution, Atom, FactSet, Program, Rule, Substitution, Symbol, Term};
use crate::error::{Error, Result};
use crate::ground::{
    enumerate_grounding, facts, heads, Deletion, DeletionKind, RuleSet, SimplifiedRule,
    DEFAULT_INSTANCE_BOUND,
};

pub type Interpretation = BTreeSet<Atom>;

/// Resource guards for the exponential parts of the oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of ground rules enumerated.
    pub max_instances: usize,
    /// Maximum number of atoms an answer-set computation may range over.
    pub max_atoms: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_instances: DEFAULT_INSTANCE_BOUND,
            max_atoms: 20,
        }
    }
}

/// `grnd(P) ∪ F` over `U = universe(P) ∪ constants(F)`.
pub fn theoretical_grounding(
    program: &Program,
    facts: &FactSet,
    limit: usize,
) -> Result<BTreeSet<Rule>> {
    enumerate_grounding(program, facts, limit)
}

fn rule_heads<'a>(rules: impl IntoIterator<Item = &'a Rule>) -> BTreeSet<Atom> {
    rules
        .into_iter()
        .flat_map(|r| r.head.iter().cloned())
        .collect()
}

/// `Inst_P(S) = { r ∈ grnd(P) | B+(r) ⊆ Heads(S) }`, by filtering the full
/// grounding over `universe(P) ∪ constants(S)`.
pub fn inst_step(program: &Program, s: &BTreeSet<Rule>, limit: usize) -> Result<BTreeSet<Rule>> {
    let extra: BTreeSet<Symbol> = s.iter().flat_map(Rule::constants).collect();
    let p = program.clone().with_universe(extra);
    let hs = rule_heads(s);
    Ok(enumerate_grounding(&p, &FactSet::default(), limit)?
        .into_iter()
        .filter(|r| r.pos.is_subset(&hs))
        .collect())
}

fn match_atom(
    pattern: &Atom,
    ground: &Atom,
    sub: &mut Substitution,
    bound: &mut Vec<Symbol>,
) -> bool {
    if pattern.predicate != ground.predicate || pattern.arity() != ground.arity() {
        return false;
    }
    let mark = bound.len();
    for (p, g) in pattern.args.iter().zip(&ground.args) {
        let c = g.symbol();
        let ok = match p {
            Term::Const(k) => k == c,
            Term::Var(v) => match sub.get(v) {
                Some(x) => x == c,
                None => {
                    sub.insert(v.clone(), c.clone());
                    bound.push(v.clone());
                    true
                }
            },
        };
        if !ok {
            for v in bound.drain(mark..) {
                sub.remove(&v);
            }
            return false;
        }
    }
    true
}

fn match_body(
    pos: &[&Atom],
    by_pred: &HashMap<&Symbol, Vec<&Atom>>,
    sub: &mut Substitution,
    out: &mut Vec<Substitution>,
) {
    let Some((first, rest)) = pos.split_first() else {
        out.push(sub.clone());
        return;
    };
    for g in by_pred.get(&first.predicate).into_iter().flatten() {
        let mut bound = Vec::new();
        if match_atom(first, g, sub, &mut bound) {
            match_body(rest, by_pred, sub, out);
            for v in bound {
                sub.remove(&v);
            }
        }
    }
}

/// Least fixpoint of `Inst_P` starting from the facts `F`. The facts
/// themselves are not part of the result.
pub fn inst_fixpoint(program: &Program, facts: &FactSet, limit: usize) -> Result<BTreeSet<Rule>> {
    let mut out: BTreeSet<Rule> = BTreeSet::new();
    let mut atoms: BTreeSet<Atom> = facts.atoms.clone();
    loop {
        let mut by_pred: HashMap<&Symbol, Vec<&Atom>> = HashMap::new();
        for a in &atoms {
            by_pred.entry(&a.predicate).or_default().push(a);
        }
        let mut fresh = Vec::new();
        for rule in &program.rules {
            let pos: Vec<&Atom> = rule.pos.iter().collect();
            let mut subs = Vec::new();
            match_body(&pos, &by_pred, &mut Substitution::new(), &mut subs);
            for sub in subs {
                let g = apply_substitution(rule, &sub)?;
                if !out.contains(&g) {
                    fresh.push(g);
                }
            }
        }
        if fresh.is_empty() {
            return Ok(out);
        }
        let mut new_atoms = Vec::new();
        for g in fresh {
            new_atoms.extend(g.head.iter().cloned());
            out.insert(g);
            if out.len() > limit {
                return Err(Error::InstanceBound { limit });
            }
        }
        atoms.extend(new_atoms);
    }
}

/// Which simplification types an application of `Simpl` may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimplTypes {
    pub negated_fact: bool,
    pub underivable: bool,
    pub remove_facts: bool,
}

impl SimplTypes {
    pub const ALL: SimplTypes = SimplTypes {
        negated_fact: true,
        underivable: true,
        remove_facts: true,
    };
    /// Types 1 and 3 only.
    pub const NO_UNDERIVABLE: SimplTypes = SimplTypes {
        negated_fact: true,
        underivable: false,
        remove_facts: true,
    };
}

/// Result of one application of `Simpl(R, Q)`.
#[derive(Clone, Debug, Default)]
pub struct SimplOutcome {
    pub rules: RuleSet,
    /// Deleted rules with the reason; type 1 wins when both apply.
    pub deleted: Vec<(SimplifiedRule, Deletion)>,
}

/// Applies one simplification pass to `s` given the context's facts and
/// heads. Returns `Err(deletion)` if the rule is removed.
pub(crate) fn simplify_rule(
    s: &SimplifiedRule,
    is_fact: impl Fn(&Atom) -> bool,
    is_head: impl Fn(&Atom) -> bool,
    types: SimplTypes,
) -> std::result::Result<SimplifiedRule, Deletion> {
    if types.negated_fact {
        let atoms: BTreeSet<Atom> = s.neg().iter().filter(|a| is_fact(a)).cloned().collect();
        if !atoms.is_empty() {
            return Err(Deletion {
                kind: DeletionKind::NegatedFact,
                atoms,
            });
        }
    }
    if types.underivable {
        let atoms: BTreeSet<Atom> = s
            .hom()
            .pos
            .iter()
            .filter(|a| !is_head(a))
            .cloned()
            .collect();
        if !atoms.is_empty() {
            return Err(Deletion {
                kind: DeletionKind::UnderivableBody,
                atoms,
            });
        }
    }
    let mut out = s.clone();
    if types.remove_facts {
        for a in s.pos() {
            if is_fact(a) {
                out.remove_atom(a);
            }
        }
    }
    Ok(out)
}

pub fn simpl_with(r: &RuleSet, q: &RuleSet, types: SimplTypes) -> SimplOutcome {
    let fs = facts(q);
    let hs = heads(q);
    let mut out = SimplOutcome::default();
    for s in r {
        match simplify_rule(s, |a| fs.contains(a), |a| hs.contains(a), types) {
            Ok(t) => {
                out.rules.insert(t);
            }
            Err(d) => out.deleted.push((s.clone(), d)),
        }
    }
    out
}

/// `Simpl(R, Q)` with all three types.
pub fn simpl(r: &RuleSet, q: &RuleSet) -> SimplOutcome {
    simpl_with(r, q, SimplTypes::ALL)
}

/// `Simpl[1,3](R, Q)`: types 1 and 3 only.
pub fn simpl13(r: &RuleSet, q: &RuleSet) -> SimplOutcome {
    simpl_with(r, q, SimplTypes::NO_UNDERIVABLE)
}

/// The chain `R, Simpl(R), Simpl²(R), …` up to and including its fixpoint.
pub fn simpl_chain(r: &RuleSet) -> Vec<RuleSet> {
    let mut chain = vec![r.clone()];
    loop {
        let last = chain.last().unwrap();
        let next = simpl(last, last).rules;
        if &next == last {
            return chain;
        }
        chain.push(next);
    }
}

/// `Simpl∞(R)`.
pub fn simpl_fixpoint(r: &RuleSet) -> RuleSet {
    simpl_chain(r).pop().unwrap()
}

/// Iterates `NR_{k+1} = Simpl(NR_k, base ∪ NR_k)` until stable.
pub fn simpl_fixpoint_against(nr: &RuleSet, base: &RuleSet) -> RuleSet {
    let mut cur = nr.clone();
    loop {
        let mut ctx = base.clone();
        ctx.extend(cur.iter().cloned());
        let next = simpl(&cur, &ctx).rules;
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// `Simpl∞(Inst∞(P, F) ∪ F)`.
pub fn least_tailored_embedding(
    program: &Program,
    facts: &FactSet,
    limit: usize,
) -> Result<RuleSet> {
    let mut rules: RuleSet = inst_fixpoint(program, facts, limit)?
        .into_iter()
        .map(SimplifiedRule::full)
        .collect();
    rules.extend(facts.as_rules().map(SimplifiedRule::full));
    Ok(simpl_fixpoint(&rules))
}

pub fn body_holds(rule: &Rule, a: &Interpretation) -> bool {
    rule.pos.iter().all(|x| a.contains(x)) && rule.neg.iter().all(|x| !a.contains(x))
}

/// `A ⊨ G`: every rule with a true body has a true head atom.
pub fn is_model(g: &[Rule], a: &Interpretation) -> bool {
    g.iter()
        .all(|r| !body_holds(r, a) || r.head.iter().any(|h| a.contains(h)))
}

/// The FLP reduct `{ r ∈ G | A ⊨ B(r) }`.
pub fn flp_reduct(g: &[Rule], a: &Interpretation) -> Vec<Rule> {
    g.iter().filter(|r| body_holds(r, a)).cloned().collect()
}

fn subsets<T: Clone>(items: &[T]) -> impl Iterator<Item = Vec<T>> + '_ {
    (0u64..(1u64 << items.len())).map(move |mask| {
        items
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, x)| x.clone())
            .collect()
    })
}

/// Enumerates every `A ⊆ Heads(G)` and keeps the minimal models of their
/// reducts. Minimality is tested against every proper subset of `A`.
pub fn answer_sets_bruteforce(g: &[Rule], max_atoms: usize) -> Result<BTreeSet<Interpretation>> {
    let atoms: Vec<Atom> = rule_heads(g).into_iter().collect();
    if atoms.len() > max_atoms {
        return Err(Error::AtomBound {
            atoms: atoms.len(),
            limit: max_atoms,
        });
    }
    let mut out = BTreeSet::new();
    for cand in subsets(&atoms) {
        let a: Interpretation = cand.iter().cloned().collect();
        let reduct = flp_reduct(g, &a);
        if !is_model(&reduct, &a) {
            continue;
        }
        let members: Vec<Atom> = a.iter().cloned().collect();
        let minimal = subsets(&members).all(|sub| {
            let b: Interpretation = sub.into_iter().collect();
            b.len() == a.len() || !is_model(&reduct, &b)
        });
        if minimal {
            out.insert(a);
        }
    }
    Ok(out)
}

/// Whether some proper subset of `a` is a model of `reduct`.
fn has_smaller_model(reduct: &[Rule], a: &Interpretation) -> bool {
    let idx: BTreeMap<&Atom, usize> = a.iter().enumerate().map(|(i, x)| (x, i)).collect();
    // literal encoding: 2*var for true, 2*var+1 for false
    let mut clauses: Vec<Vec<usize>> = Vec::new();
    for r in reduct {
        let mut c = Vec::new();
        let mut always = false;
        for p in &r.pos {
            match idx.get(p) {
                Some(&i) => c.push(2 * i + 1),
                // outside A, so false in every subset: the rule is vacuous
                None => always = true,
            }
        }
        if always {
            continue;
        }
        c.extend(r.head.iter().filter_map(|h| idx.get(h)).map(|&i| 2 * i));
        clauses.push(c);
    }
    clauses.push((0..a.len()).map(|i| 2 * i + 1).collect());
    dpll(&clauses, &mut vec![None; a.len()])
}

fn dpll(clauses: &[Vec<usize>], assign: &mut Vec<Option<bool>>) -> bool {
    let value = |lit: usize, assign: &[Option<bool>]| assign[lit / 2].map(|v| v == (lit.is_multiple_of(2)));
    let mut trail = Vec::new();
    let result = loop {
        let mut changed = false;
        let mut conflict = false;
        for c in clauses {
            let mut unassigned = None;
            let mut n_unassigned = 0;
            let mut sat = false;
            for &l in c {
                match value(l, assign) {
                    Some(true) => {
                        sat = true;
                        break;
                    }
                    Some(false) => {}
                    None => {
                        n_unassigned += 1;
                        unassigned = Some(l);
                    }
                }
            }
            if sat {
                continue;
            }
            match n_unassigned {
                0 => {
                    conflict = true;
                    break;
                }
                1 => {
                    let l = unassigned.unwrap();
                    assign[l / 2] = Some(l % 2 == 0);
                    trail.push(l / 2);
                    changed = true;
                }
                _ => {}
            }
        }
        if conflict {
            break false;
        }
        if !changed {
            match assign.iter().position(Option::is_none) {
                None => break true,
                Some(v) => {
                    for choice in [false, true] {
                        assign[v] = Some(choice);
                        if dpll(clauses, assign) {
                            return true;
                        }
                    }
                    assign[v] = None;
                    break false;
                }
            }
        }
    };
    for v in trail {
        assign[v] = None;
    }
    result
}

/// `A` is a minimal model of the reduct of `G` with respect to `A`.
pub fn is_answer_set(g: &[Rule], a: &Interpretation) -> bool {
    let reduct = flp_reduct(g, a);
    is_model(&reduct, a) && !has_smaller_model(&reduct, a)
}

struct IndexedRule {
    head: Vec<usize>,
    pos: Vec<usize>,
    neg: Vec<usize>,
}

struct Search<'a> {
    rules: Vec<IndexedRule>,
    supports: Vec<Vec<usize>>,
    atoms: Vec<Atom>,
    source: &'a [Rule],
    out: BTreeSet<Interpretation>,
}

#[derive(PartialEq)]
enum Body {
    True,
    False,
    Open,
}

impl Search<'_> {
    fn body(&self, r: &IndexedRule, v: &[Option<bool>]) -> Body {
        let mut open = false;
        for &p in &r.pos {
            match v[p] {
                Some(false) => return Body::False,
                None => open = true,
                _ => {}
            }
        }
        for &n in &r.neg {
            match v[n] {
                Some(true) => return Body::False,
                None => open = true,
                _ => {}
            }
        }
        if open {
            Body::Open
        } else {
            Body::True
        }
    }

    /// Unit propagation over rule clauses and supportedness. Returns false on
    /// conflict.
    fn propagate(&self, v: &mut [Option<bool>]) -> bool {
        loop {
            let mut changed = false;
            for r in &self.rules {
                if r.head.iter().any(|&h| v[h] == Some(true)) {
                    continue;
                }
                let open_heads: Vec<usize> =
                    r.head.iter().copied().filter(|&h| v[h].is_none()).collect();
                match (self.body(r, v), open_heads.len()) {
                    (Body::True, 0) => return false,
                    (Body::True, 1) => {
                        v[open_heads[0]] = Some(true);
                        changed = true;
                    }
                    (Body::Open, 0) => {
                        let open_pos: Vec<usize> =
                            r.pos.iter().copied().filter(|&p| v[p].is_none()).collect();
                        let open_neg: Vec<usize> =
                            r.neg.iter().copied().filter(|&n| v[n].is_none()).collect();
                        if open_pos.len() + open_neg.len() == 1 {
                            if let Some(&p) = open_pos.first() {
                                v[p] = Some(false);
                            } else {
                                v[open_neg[0]] = Some(true);
                            }
                            changed = true;
                        }
                    }
                    _ => {}
                }
            }
            for a in 0..v.len() {
                if v[a] == Some(false) {
                    continue;
                }
                let candidates: Vec<usize> = self.supports[a]
                    .iter()
                    .copied()
                    .filter(|&ri| {
                        let r = &self.rules[ri];
                        self.body(r, v) != Body::False
                            && r.head.iter().all(|&h| h == a || v[h] != Some(true))
                    })
                    .collect();
                match (candidates.len(), v[a]) {
                    (0, Some(true)) => return false,
                    (0, _) => {
                        v[a] = Some(false);
                        changed = true;
                    }
                    (1, Some(true)) => {
                        let r = &self.rules[candidates[0]];
                        for &p in &r.pos {
                            if v[p].is_none() {
                                v[p] = Some(true);
                                changed = true;
                            }
                        }
                        for &n in &r.neg {
                            if v[n].is_none() {
                                v[n] = Some(false);
                                changed = true;
                            }
                        }
                        for &h in &r.head {
                            if h != a && v[h].is_none() {
                                v[h] = Some(false);
                                changed = true;
                            }
                        }
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn run(&mut self, mut v: Vec<Option<bool>>) {
        if !self.propagate(&mut v) {
            return;
        }
        match v.iter().position(Option::is_none) {
            Some(i) => {
                for choice in [true, false] {
                    let mut w = v.clone();
                    w[i] = Some(choice);
                    self.run(w);
                }
            }
            None => {
                let a: Interpretation = (0..v.len())
                    .filter(|&i| v[i] == Some(true))
                    .map(|i| self.atoms[i].clone())
                    .collect();
                let reduct = flp_reduct(self.source, &a);
                if is_model(&reduct, &a) && !has_smaller_model(&reduct, &a) {
                    self.out.insert(a);
                }
            }
        }
    }
}

/// Atoms derivable when negation is ignored; every answer set lies inside.
fn possible_atoms(g: &[Rule]) -> BTreeSet<Atom> {
    let mut possible = BTreeSet::new();
    loop {
        let before = possible.len();
        for r in g {
            if r.pos.iter().all(|a| possible.contains(a)) {
                possible.extend(r.head.iter().cloned());
            }
        }
        if possible.len() == before {
            return possible;
        }
    }
}

/// Exact answer sets by branching over the atoms that can possibly be true,
/// with unit and support propagation and a minimality check at each leaf.
pub fn answer_sets(g: &[Rule], max_atoms: usize) -> Result<BTreeSet<Interpretation>> {
    let possible = possible_atoms(g);
    if possible.len() > max_atoms {
        return Err(Error::AtomBound {
            atoms: possible.len(),
            limit: max_atoms,
        });
    }
    let atoms: Vec<Atom> = possible.iter().cloned().collect();
    let idx: HashMap<&Atom, usize> = atoms.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let mut rules = Vec::new();
    let mut supports = vec![Vec::new(); atoms.len()];
    for r in g {
        if !r.pos.iter().all(|a| possible.contains(a)) {
            continue;
        }
        let ri = rules.len();
        let head: Vec<usize> = r.head.iter().map(|a| idx[a]).collect();
        for &h in &head {
            supports[h].push(ri);
        }
        rules.push(IndexedRule {
            head,
            pos: r.pos.iter().map(|a| idx[a]).collect(),
            neg: r.neg.iter().filter_map(|a| idx.get(a).copied()).collect(),
        });
    }
    let source: Vec<Rule> = g
        .iter()
        .filter(|r| r.pos.iter().all(|a| possible.contains(a)))
        .cloned()
        .collect();
    let mut search = Search {
        rules,
        supports,
        atoms,
        source: &source,
        out: BTreeSet::new(),
    };
    search.run(vec![None; search.atoms.len()]);
    Ok(search.out)
}

/// Current-body view of simplified rules, ready for the solvers.
pub fn as_ground_rules<'a>(rules: impl IntoIterator<Item = &'a SimplifiedRule>) -> Vec<Rule> {
    rules.into_iter().map(SimplifiedRule::current).collect()
}
