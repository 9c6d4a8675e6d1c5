mod common;

use std::collections::BTreeSet;

use common::*;
use optground::engine::Mode;
use optground::ground::{
    embeds, heads, is_simplified_subset, simplified_intersection, verify_embedding,
    verify_tailored_embedding, GroundProgram, RuleSet, SimplifiedRule,
};
use optground::oracle::{self, Interpretation};
use optground::session::{filter_relevant, run_shots, RunOptions};
use optground::text::{parse_program, render_rules, BodyMode};
use optground::{EngineConfig, Program};

const R1: &str = "r(a,b) :- e(a,b), not ab(a).";
const R2: &str = "r(c,b) | s(c,b) :- e(c,a), r(a,b).";
const R3: &str = "r(c,a) :- e(c,a), not ab(c).";
const R4: &str = "r(c,d) | s(c,d) :- e(c,a), r(a,d).";
const R5: &str = "r(a,d) :- e(a,d), not ab(a).";

fn p0() -> Program {
    parse_program(P0).unwrap()
}

fn r1() -> SimplifiedRule {
    simplified(R1, &[])
}
fn r1s() -> SimplifiedRule {
    simplified(R1, &["e(a,b)"])
}
fn r2s() -> SimplifiedRule {
    simplified(R2, &["e(c,a)"])
}
fn r3() -> SimplifiedRule {
    simplified(R3, &[])
}
fn r4s() -> SimplifiedRule {
    simplified(R4, &["e(c,a)"])
}
fn r5() -> SimplifiedRule {
    simplified(R5, &[])
}

fn g1() -> RuleSet {
    rule_set([r1(), simplified(R2, &[]), r3()])
}
fn tg1() -> RuleSet {
    rule_set([r1s(), r2s()])
}
fn tg3() -> RuleSet {
    rule_set([r1(), r2s(), r3(), r4s(), r5()])
}

fn atoms(text: &str) -> Interpretation {
    facts(text).atoms
}

#[test]
fn tg1_renders() {
    assert_eq!(
        render_rules(&tg1(), BodyMode::Simplified),
        "r(a,b) :- not ab(a).\nr(c,b) | s(c,b) :- r(a,b)."
    );
    assert_eq!(
        render_rules(&tg1(), BodyMode::Homologous),
        "r(a,b) :- e(a,b), not ab(a).\nr(c,b) | s(c,b) :- e(c,a), r(a,b)."
    );
}

#[test]
fn heads_of_fixtures() {
    let h = |s: &str| atoms(s);
    assert_eq!(heads(&g1()), h("r(a,b). r(c,b). s(c,b). r(c,a)."));
    assert_eq!(heads(&tg1()), h("r(a,b). r(c,b). s(c,b)."));
    let g = GroundProgram::from_rules(tg1());
    assert!(g.derived_facts().is_empty());
}

#[test]
fn order_and_meet() {
    assert!(is_simplified_subset(&tg1(), &tg3()));
    assert!(!is_simplified_subset(&tg3(), &tg1()));
    let t0 = rule_set([r1(), r2s()]);
    assert_eq!(simplified_intersection(&t0, &tg1()), tg1());
}

#[test]
fn embedding_of_r3() {
    let f1 = facts(F1);
    let r3 = ground_rule(R3);
    let e = embeds(&with_facts(&g1(), &f1), &r3);
    assert!(e.by_body && e.by_head && e.embeds);
    let e = embeds(&with_facts(&tg1(), &f1), &r3);
    assert!(e.by_body && !e.by_head && !e.embeds);
}

#[test]
fn verification_examples() {
    let p = p0();
    let f1 = facts(F1);
    let f2 = facts(F2);
    let check =
        |rules: &RuleSet, f| verify_tailored_embedding(rules, &p, f, INSTANCE_LIMIT).unwrap();
    assert!(check(&with_facts(&tg3(), &f1), &f1).holds);
    assert!(check(&with_facts(&g1(), &f1), &f1).holds);
    assert!(
        verify_embedding(&with_facts(&g1(), &f1), &p, &f1, INSTANCE_LIMIT)
            .unwrap()
            .holds
    );
    let report = check(&with_facts(&tg1(), &f2), &f2);
    assert!(!report.holds);
    assert!(!report.witnesses.is_empty());
}

#[test]
fn grounding_and_instantiation() {
    let p = p0();
    let f1 = facts(F1);
    let g = oracle::theoretical_grounding(&p, &f1, INSTANCE_LIMIT).unwrap();
    assert_eq!(g.len(), 9 + 27 + f1.len());
    let step = oracle::inst_step(&p, &f1.as_rules().collect(), INSTANCE_LIMIT).unwrap();
    assert!(step.contains(&ground_rule(R1)) && step.contains(&ground_rule(R3)));
    assert!(!step.contains(&ground_rule(R2)));
    let fix = oracle::inst_fixpoint(&p, &f1, INSTANCE_LIMIT).unwrap();
    let expected: BTreeSet<_> = [R1, R2, R3].into_iter().map(ground_rule).collect();
    assert_eq!(fix, expected);
}

#[test]
fn simplification_examples() {
    let f1 = facts(F1);
    let base = with_facts(&g1(), &f1);
    let out = oracle::simpl(&rule_set([r3()]), &base);
    assert!(out.rules.is_empty());
    assert_eq!(out.deleted[0].1.type_number(), 1);
    assert_eq!(
        oracle::simpl(&rule_set([r1()]), &base).rules,
        rule_set([r1s()])
    );
    assert_eq!(oracle::simpl_fixpoint(&base), with_facts(&tg1(), &f1));
    assert_eq!(
        oracle::least_tailored_embedding(&p0(), &f1, INSTANCE_LIMIT).unwrap(),
        with_facts(&tg1(), &f1)
    );

    let f2 = facts(F2);
    let nr = with_facts(&rule_set([r3(), r4s(), r5()]), &f2);
    let out = oracle::simpl13(&rule_set([r5()]), &nr);
    assert_eq!(out.rules, rule_set([simplified(R5, &["e(a,d)"])]));
}

#[test]
fn answer_sets_of_g1() {
    let f1 = facts(F1);
    let mut g: Vec<_> = oracle::as_ground_rules(&g1());
    g.extend(f1.as_rules());
    let expected: BTreeSet<Interpretation> = [
        atoms("e(c,a). e(a,b). ab(c). r(a,b). r(c,b)."),
        atoms("e(c,a). e(a,b). ab(c). r(a,b). s(c,b)."),
    ]
    .into();
    assert_eq!(solve(&g), expected);
    assert_eq!(oracle::answer_sets_bruteforce(&g, 16).unwrap(), expected);
    assert!(!oracle::is_answer_set(
        &g,
        &atoms("e(c,a). e(a,b). ab(c). r(a,b). r(c,b). s(c,b).")
    ));

    let a = atoms("e(c,a). e(a,b). ab(c). r(a,b). r(c,b).");
    let reduct = oracle::flp_reduct(&g, &a);
    assert!(reduct.contains(&ground_rule(R1)) && reduct.contains(&ground_rule(R2)));
    assert!(!reduct.contains(&ground_rule(R3)));
}

#[test]
fn session_shots() {
    let mut s = session(&p0(), Mode::Tailored);
    s.incr_inst(&facts(F1)).unwrap();
    assert_eq!(s.program().to_rule_set(), tg1());
    assert!(s.deleted().contains(&ground_rule(R3)));
    s.incr_inst(&facts(F2)).unwrap();
    let tg2 = rule_set([r1(), r2s(), r3(), r4s(), simplified(R5, &["e(a,d)"])]);
    assert_eq!(s.program().to_rule_set(), tg2);
    s.incr_inst(&facts(F1)).unwrap();
    assert_eq!(s.program().to_rule_set(), tg3());
    let st = s.incr_inst(&facts(F4)).unwrap();
    assert_eq!(s.program().to_rule_set(), tg3());
    assert_eq!((st.rules_added, st.rules_restored), (0, 0));
}

#[test]
fn relevance_filter() {
    let f1 = facts(F1);
    let g = GroundProgram::from_rules(tg3());
    let kept = filter_relevant(&g, &f1);
    assert_eq!(kept, rule_set([r1(), r2s(), r3()]));
    let solve_with = |rules: &RuleSet| {
        let mut g = oracle::as_ground_rules(rules);
        g.extend(f1.as_rules());
        solve(&g)
    };
    assert_eq!(solve_with(&kept), solve_with(&tg3()));
}

#[test]
fn scratch_run_counts_two_answer_sets() {
    let options = RunOptions {
        config: EngineConfig {
            mode: Mode::Scratch,
            ..EngineConfig::default()
        },
        solve: true,
        ..RunOptions::default()
    };
    let out = run_shots(p0(), &[facts(F1)], options).unwrap();
    assert_eq!(out[0].report.answer_set_count, Some(2));
}
