#![allow(dead_code)]

use std::collections::BTreeSet;

use optground::ast::{ground_instances, Atom, FactSet, Program, Rule, Symbol, Term};
use optground::engine::{EngineConfig, Mode, Session};
use optground::ground::{is_simplified_subset, verify_embedding, RuleSet, SimplifiedRule};
use optground::oracle::{self, answer_sets, Interpretation};
use optground::text::{parse_fact_set, parse_program};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const P0: &str = "r(X,Y) :- e(X,Y), not ab(X).\nr(X,Z) | s(X,Z) :- e(X,Y), r(Y,Z).";
pub const F1: &str = "e(c,a). e(a,b). ab(c).";
pub const F2: &str = "e(c,a). e(a,d).";
pub const F4: &str = "e(a,d). e(c,a). e(a,b).";

pub const INSTANCE_LIMIT: usize = 200_000;
pub const SOLVE_ATOMS: usize = 64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn facts(text: &str) -> FactSet {
    parse_fact_set(text).unwrap()
}

pub fn ground_rule(text: &str) -> Rule {
    parse_program(text).unwrap().rules.remove(0)
}

pub fn atom(text: &str) -> Atom {
    facts(&format!("{text}.")).atoms.into_iter().next().unwrap()
}

/// A simplified rule given its homologous text and the removed atoms.
pub fn simplified(hom: &str, removed: &[&str]) -> SimplifiedRule {
    SimplifiedRule::with_removed(ground_rule(hom), removed.iter().map(|a| atom(a)))
}

pub fn rule_set(rules: impl IntoIterator<Item = SimplifiedRule>) -> RuleSet {
    rules.into_iter().collect()
}

pub fn with_facts(rules: &RuleSet, f: &FactSet) -> RuleSet {
    let mut out = rules.clone();
    out.extend(f.as_rules().map(SimplifiedRule::full));
    out
}

pub fn solve(rules: &[Rule]) -> BTreeSet<Interpretation> {
    answer_sets(rules, SOLVE_ATOMS).expect("solver atom bound")
}

/// Answer sets of `grnd(P) ∪ F`.
pub fn reference_answer_sets(p: &Program, f: &FactSet) -> BTreeSet<Interpretation> {
    let g: Vec<Rule> = oracle::theoretical_grounding(p, f, INSTANCE_LIMIT)
        .unwrap()
        .into_iter()
        .collect();
    solve(&g)
}

/// A random function-free program together with its shots.
#[derive(Clone, Debug)]
pub struct Instance {
    pub program: Program,
    pub shots: Vec<FactSet>,
    pub seed: u64,
}

struct Vocab {
    preds: Vec<(String, usize)>,
    consts: Vec<String>,
}

impl Vocab {
    fn random(rng: &mut ChaCha8Rng) -> Vocab {
        let n_preds = rng.gen_range(2..=4);
        let preds = (0..n_preds)
            .map(|i| (format!("p{i}"), rng.gen_range(0..=2)))
            .collect();
        let n_consts = rng.gen_range(1..=3);
        let consts = ["a", "b", "c"][..n_consts]
            .iter()
            .map(|s| s.to_string())
            .collect();
        Vocab { preds, consts }
    }

    fn term(&self, rng: &mut ChaCha8Rng, vars: &[&str]) -> Term {
        if vars.is_empty() || rng.gen_bool(0.15) {
            Term::Const(Symbol::new(self.consts.choose(rng).unwrap()))
        } else {
            Term::Var(Symbol::new(vars.choose(rng).unwrap()))
        }
    }

    fn atom(&self, rng: &mut ChaCha8Rng, vars: &[&str]) -> Atom {
        let (name, arity) = self.preds.choose(rng).unwrap();
        let args = (0..*arity).map(|_| self.term(rng, vars)).collect();
        Atom::new(Symbol::new(name), args)
    }

    fn base(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        for (name, arity) in &self.preds {
            let mut tuples: Vec<Vec<&String>> = vec![vec![]];
            for _ in 0..*arity {
                tuples = tuples
                    .into_iter()
                    .flat_map(|t| {
                        self.consts.iter().map(move |c| {
                            let mut t = t.clone();
                            t.push(c);
                            t
                        })
                    })
                    .collect();
            }
            for t in tuples {
                let args: Vec<&str> = t.iter().map(|s| s.as_str()).collect();
                out.push(Atom::from_names(name, &args));
            }
        }
        out
    }
}

fn random_rule(rng: &mut ChaCha8Rng, v: &Vocab) -> Rule {
    let all_vars = ["X", "Y", "Z"];
    let n_vars = rng.gen_range(0..=3);
    let vars = &all_vars[..n_vars];
    let n_pos = if rng.gen_bool(0.1) {
        0
    } else {
        rng.gen_range(1..=3)
    };
    let pos: Vec<Atom> = (0..n_pos).map(|_| v.atom(rng, vars)).collect();
    let bound: Vec<&str> = pos
        .iter()
        .flat_map(|a| a.variables())
        .map(|s| all_vars.iter().copied().find(|x| *x == s.as_str()).unwrap())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_neg = rng.gen_range(0..=2);
    let neg: Vec<Atom> = (0..n_neg).map(|_| v.atom(rng, &bound)).collect();
    let n_head = match rng.gen_range(0..10) {
        0 => 0,
        1..=3 => 2,
        _ => 1,
    };
    let head: Vec<Atom> = (0..n_head).map(|_| v.atom(rng, &bound)).collect();
    Rule::new(head, pos, neg)
}

fn random_facts(rng: &mut ChaCha8Rng, base: &[Atom], p: f64) -> FactSet {
    FactSet::new(base.iter().filter(|_| rng.gen_bool(p)).cloned()).unwrap()
}

/// Up to six safe rules over at most four predicates of arity at most two
/// and three constants, with three random shots.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = rng(seed);
    let v = Vocab::random(&mut rng);
    let n_rules = rng.gen_range(1..=6);
    let rules: Vec<Rule> = (0..n_rules).map(|_| random_rule(&mut rng, &v)).collect();
    let program = Program::new(rules).with_universe(v.consts.iter().map(|c| Symbol::new(c)));
    let base = v.base();
    let shots = (0..3)
        .map(|_| {
            let density = rng.gen_range(0.1..0.5);
            random_facts(&mut rng, &base, density)
        })
        .collect();
    Instance {
        program,
        shots,
        seed,
    }
}

/// Program and facts whose `grnd(P) ∪ F` has at most six rules.
pub fn tiny_instance(seed: u64) -> (Program, FactSet) {
    let mut rng = rng(seed);
    let names = ["a", "b", "c", "d", "e"];
    let pick = |rng: &mut ChaCha8Rng| Atom::from_names(names.choose(rng).unwrap(), &[]);
    let n_facts = rng.gen_range(0..=2);
    let f = FactSet::new((0..n_facts).map(|_| pick(&mut rng))).unwrap();
    let n_rules = rng.gen_range(1..=6 - f.len());
    let rules: Vec<Rule> = (0..n_rules)
        .map(|_| {
            let n_head = if rng.gen_bool(0.1) {
                0
            } else {
                rng.gen_range(1..=2)
            };
            let head: Vec<Atom> = (0..n_head).map(|_| pick(&mut rng)).collect();
            let pos: Vec<Atom> = (0..rng.gen_range(0..=2)).map(|_| pick(&mut rng)).collect();
            let neg: Vec<Atom> = (0..rng.gen_range(0..=1)).map(|_| pick(&mut rng)).collect();
            Rule::new(head, pos, neg)
        })
        .collect();
    (Program::new(rules), f)
}

/// `grnd(P) ∪ F` over the program universe and the fact constants.
pub fn full_grounding(p: &Program, f: &FactSet) -> BTreeSet<Rule> {
    oracle::theoretical_grounding(p, f, INSTANCE_LIMIT).unwrap()
}

/// A random embedding: `F`, a random subset of the grounding, and every
/// ground rule whose positive body is covered, closed under that rule.
pub fn random_embedding(rng: &mut ChaCha8Rng, p: &Program, f: &FactSet) -> RuleSet {
    let ground: Vec<Rule> = full_grounding(p, f).into_iter().collect();
    let mut e: BTreeSet<Rule> = f.as_rules().collect();
    e.extend(ground.iter().filter(|_| rng.gen_bool(0.2)).cloned());
    loop {
        let heads: BTreeSet<&Atom> = e.iter().flat_map(|r| &r.head).collect();
        let more: Vec<Rule> = ground
            .iter()
            .filter(|r| !e.contains(*r) && r.pos.iter().all(|a| heads.contains(a)))
            .cloned()
            .collect();
        if more.is_empty() {
            break;
        }
        e.extend(more);
    }
    e.into_iter().map(SimplifiedRule::full).collect()
}

/// Applies `Simpl(R', E)` to random subsets `R'` of `E` a few times.
pub fn partially_simplify(rng: &mut ChaCha8Rng, e: &RuleSet) -> RuleSet {
    let mut cur = e.clone();
    for _ in 0..rng.gen_range(1..=4) {
        let (pick, keep): (Vec<SimplifiedRule>, Vec<SimplifiedRule>) =
            cur.iter().cloned().partition(|_| rng.gen_bool(0.5));
        let pick: RuleSet = pick.into_iter().collect();
        let mut next: RuleSet = keep.into_iter().collect();
        next.extend(oracle::simpl(&pick, &cur).rules);
        cur = next;
    }
    cur
}

/// Every set obtained by dropping rules of `ground` or removing subsets of
/// their positive bodies.
pub fn all_candidates(ground: &[Rule]) -> Vec<RuleSet> {
    let mut out = vec![RuleSet::new()];
    for r in ground {
        let pos: Vec<&Atom> = r.pos.iter().collect();
        let mut options: Vec<Option<SimplifiedRule>> = vec![None];
        for mask in 0..(1u32 << pos.len()) {
            let removed = pos
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, a)| (*a).clone());
            options.push(Some(SimplifiedRule::with_removed(r.clone(), removed)));
        }
        out = out
            .into_iter()
            .flat_map(|set| {
                options.iter().map(move |o| {
                    let mut s = set.clone();
                    if let Some(x) = o {
                        s.insert(x.clone());
                    }
                    s
                })
            })
            .collect();
    }
    out
}

pub fn session(p: &Program, mode: Mode) -> Session {
    let config = EngineConfig {
        mode,
        ..EngineConfig::default()
    };
    Session::new(p.clone(), config).unwrap()
}

/// Outcome of replaying one random instance through all three modes.
#[derive(Debug, Default)]
pub struct SessionCheck {
    pub answer_sets_match: bool,
    pub tailored_is_te: bool,
    pub monotone: bool,
    pub replay_quiet: bool,
    pub bookkeeping: bool,
    pub plain_embeds: bool,
    pub plain_covers_tailored: bool,
    pub scratch_matches: bool,
    pub failure: Option<String>,
}

impl SessionCheck {
    pub fn all(&self) -> bool {
        self.answer_sets_match
            && self.tailored_is_te
            && self.monotone
            && self.replay_quiet
            && self.bookkeeping
            && self.plain_embeds
            && self.plain_covers_tailored
            && self.scratch_matches
    }
}

/// Runs the shots of `inst` followed by a replay of all accumulated facts,
/// checking the per-shot invariants of the incremental engine.
pub fn check_session(inst: &Instance) -> SessionCheck {
    let mut c = SessionCheck {
        answer_sets_match: true,
        tailored_is_te: true,
        monotone: true,
        replay_quiet: true,
        bookkeeping: true,
        plain_embeds: true,
        plain_covers_tailored: true,
        scratch_matches: true,
        failure: None,
    };
    let note = |c: &mut SessionCheck, what: &str| {
        if c.failure.is_none() {
            c.failure = Some(format!("seed {}: {what}\n{}", inst.seed, describe(inst)));
        }
    };
    let mut tailored = session(&inst.program, Mode::Tailored);
    let mut plain = session(&inst.program, Mode::Plain);
    let mut scratch = session(&inst.program, Mode::Scratch);
    let mut shots = inst.shots.clone();
    let af: BTreeSet<Atom> = shots.iter().flat_map(|f| f.atoms.iter().cloned()).collect();
    shots.push(FactSet::new(af).unwrap());

    let mut prev = RuleSet::new();
    let mut union = BTreeSet::new();
    let mut inter: Option<BTreeSet<Atom>> = None;
    for (i, f) in shots.iter().enumerate() {
        let replay = i == shots.len() - 1;
        let before = tailored.program().len();
        let stats = tailored.incr_inst(f).unwrap();
        plain.incr_inst(f).unwrap();
        scratch.incr_inst(f).unwrap();
        let p = tailored.verification_program();

        let reference = reference_answer_sets(&p, f);
        let got = solve(&tailored.ground_with_facts(f));
        if got != reference {
            c.answer_sets_match = false;
            note(
                &mut c,
                &format!(
                    "shot {}: answer sets differ: got {got:?} expected {reference:?}",
                    i + 1
                ),
            );
        }
        if solve(&plain.ground_with_facts(f)) != reference {
            c.answer_sets_match = false;
            note(&mut c, &format!("shot {}: plain answer sets differ", i + 1));
        }
        if solve(&scratch.ground_with_facts(f)) != got {
            c.scratch_matches = false;
            note(
                &mut c,
                &format!("shot {}: scratch answer sets differ", i + 1),
            );
        }

        let cur = tailored.program().to_rule_set();
        let te = optground::verify_tailored_embedding(&with_facts(&cur, f), &p, f, INSTANCE_LIMIT)
            .unwrap();
        if !te.holds {
            c.tailored_is_te = false;
            note(
                &mut c,
                &format!(
                    "shot {}: not a tailored embedding, witnesses {:?}",
                    i + 1,
                    te.witnesses
                ),
            );
        }
        if !is_simplified_subset(&prev, &cur) {
            c.monotone = false;
            note(&mut c, &format!("shot {}: not monotone", i + 1));
        }
        if !tailored.program().views_consistent() {
            c.monotone = false;
            note(&mut c, &format!("shot {}: views inconsistent", i + 1));
        }
        prev = cur.clone();

        union.extend(f.atoms.iter().cloned());
        let pf = match inter {
            None => f.atoms.clone(),
            Some(x) => x.intersection(&f.atoms).cloned().collect(),
        };
        inter = Some(pf.clone());
        if tailored.accumulated_facts() != &union || tailored.persistent_facts() != &pf {
            c.bookkeeping = false;
            note(&mut c, &format!("shot {}: AF/PF mismatch", i + 1));
        }

        let plain_set = plain.program().to_rule_set();
        let emb = verify_embedding(&with_facts(&plain_set, f), &p, f, INSTANCE_LIMIT).unwrap();
        if !emb.holds {
            c.plain_embeds = false;
            note(
                &mut c,
                &format!("shot {}: plain program is not an embedding", i + 1),
            );
        }
        if !is_simplified_subset(&cur, &plain_set) {
            c.plain_covers_tailored = false;
            note(
                &mut c,
                &format!("shot {}: plain does not cover tailored", i + 1),
            );
        }

        if replay
            && (stats.rules_added != 0
                || stats.rules_restored != 0
                || tailored.program().len() != before)
        {
            c.replay_quiet = false;
            note(
                &mut c,
                &format!("replay shot changed the program: {stats:?}"),
            );
        }
    }
    c
}

pub fn describe(inst: &Instance) -> String {
    let mut s = String::new();
    for r in &inst.program.rules {
        s.push_str(&format!("{r}\n"));
    }
    for (i, f) in inst.shots.iter().enumerate() {
        let atoms: Vec<String> = f.atoms.iter().map(|a| a.to_string()).collect();
        s.push_str(&format!("F{}: {}\n", i + 1, atoms.join(" ")));
    }
    s
}

/// The least tailored embedding computed by `Simpl∞(Inst∞(P, F) ∪ F)`.
pub fn lte(p: &Program, f: &FactSet) -> RuleSet {
    oracle::least_tailored_embedding(p, f, INSTANCE_LIMIT).unwrap()
}

/// All ground instances of the rules of `p` over `universe`, for counting.
pub fn instance_counts(p: &Program, universe: &BTreeSet<Symbol>) -> Vec<usize> {
    p.rules
        .iter()
        .map(|r| ground_instances(r, universe).len())
        .collect()
}

/// Sensor program evaluated on a sliding window; time slots cycle so the
/// vocabulary saturates after `slots` shots.
pub const STREAM_PROGRAM: &str = "
reading(S,T) :- obs(S,T), not faulty(S).
alarm(S) :- reading(S,T), high(S,T).
ok(S) | check(S) :- reading(S,T), not alarm(S).
faulty(S) :- broken(S).
stale(S,T) :- obs(S,T), not now(T).
";

pub fn sliding_window(
    shots: usize,
    sensors: usize,
    slots: usize,
    window: usize,
    seed: u64,
) -> Vec<FactSet> {
    let mut rng = rng(seed);
    (0..shots)
        .map(|k| {
            let mut atoms = vec![Atom::from_names("now", &[&format!("t{}", k % slots)])];
            for back in 0..window.min(k + 1) {
                let t = format!("t{}", (k + slots - back) % slots);
                for s in 0..sensors {
                    let s = format!("s{s}");
                    if rng.gen_bool(0.7) {
                        atoms.push(Atom::from_names("obs", &[&s, &t]));
                        if rng.gen_bool(0.2) {
                            atoms.push(Atom::from_names("high", &[&s, &t]));
                        }
                    }
                }
            }
            for s in 0..sensors {
                if rng.gen_bool(0.1) {
                    atoms.push(Atom::from_names("broken", &[&format!("s{s}")]));
                }
            }
            FactSet::new(atoms).unwrap()
        })
        .collect()
}
