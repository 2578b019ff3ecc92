use std::collections::BTreeSet;

use tnplan::domains::{generate, InstanceSpec};
use tnplan::pddl::{parse_domain_and_problem, parse_with_warnings, write_domain, write_problem};
use tnplan::{ConditionSet, EffectSet, Problem};

fn specs() -> Vec<InstanceSpec> {
    vec![
        InstanceSpec::flying_observer(3, 4, 2),
        InstanceSpec::configure_in_flight(3, 4, 2),
        InstanceSpec::factory_qa(2, 3, 2, true),
        InstanceSpec::factory_qa(2, 3, 2, false),
        InstanceSpec::factory_qa_in_flight(3, 4, 2, true),
        InstanceSpec::linear_generator(3),
    ]
}

/// Name-based rendering of a problem, independent of index order.
fn canonical(p: &Problem) -> BTreeSet<String> {
    let props = |cs: &ConditionSet| {
        let mut v: Vec<String> = cs.props.iter().map(|q| p.propositions[q.0].clone()).collect();
        v.extend(cs.numeric.iter().map(|c| p.describe_condition(c)));
        v.sort();
        v
    };
    let effs = |es: &EffectSet| {
        let mut v: Vec<String> = es.add.iter().map(|q| format!("+{}", p.propositions[q.0])).collect();
        v.extend(es.del.iter().map(|q| format!("-{}", p.propositions[q.0])));
        for e in &es.numeric {
            let terms: Vec<String> = e
                .expr
                .terms
                .iter()
                .map(|(w, v)| format!("{w}*{}", p.variables[v.0]))
                .collect();
            v.push(format!(
                "{:?} {} {:?} {}",
                e.mode, p.variables[e.target.0], terms, e.expr.constant
            ));
        }
        v.sort();
        v
    };
    let mut out = BTreeSet::new();
    for a in &p.actions {
        let rates: Vec<String> = a
            .continuous
            .iter()
            .map(|c| format!("{} {}", p.variables[c.target.0], c.signed_rate()))
            .collect();
        out.insert(format!(
            "{} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?}",
            a.name.replace("__", " "),
            a.duration_window(),
            props(&a.pre_start),
            props(&a.invariant),
            props(&a.pre_end),
            effs(&a.eff_start),
            effs(&a.eff_end),
            rates,
            a.kind
        ));
    }
    for q in &p.initial.true_propositions {
        out.insert(format!("init {}", p.propositions[q.0]));
    }
    for (i, v) in p.initial.assignments.iter().enumerate() {
        out.insert(format!("init {} = {v}", p.variables[i]));
    }
    for q in &p.goal.propositions {
        out.insert(format!("goal {}", p.propositions[q.0]));
    }
    for c in &p.goal.numeric_conditions {
        out.insert(format!("goal {}", p.describe_condition(c)));
    }
    out
}

#[test]
fn generated_instances_round_trip() {
    for spec in specs() {
        let inst = generate(&spec, 3).unwrap();
        let p = parse_domain_and_problem(&inst.domain, &inst.problem)
            .unwrap_or_else(|d| panic!("{:?}: {}", spec.family, d[0]));
        let again = parse_domain_and_problem(&write_domain(&p), &write_problem(&p))
            .unwrap_or_else(|d| panic!("{:?} rewritten: {}\n{}", spec.family, d[0], write_domain(&p)));
        assert_eq!(canonical(&p), canonical(&again), "{:?}", spec.family);
    }
}

#[test]
fn flying_observer_has_six_schemas() {
    let inst = generate(&InstanceSpec::flying_observer(2, 3, 1), 0).unwrap();
    let p = parse_domain_and_problem(&inst.domain, &inst.problem).unwrap();
    let heads: BTreeSet<&str> = p
        .actions
        .iter()
        .map(|a| a.name.split(' ').next().unwrap())
        .collect();
    let expected: BTreeSet<&str> = ["take-off", "set-course", "fly", "configure", "observe", "release"]
        .into_iter()
        .collect();
    assert_eq!(heads, expected);
    // static leg topology prunes set-course to the chain
    let courses = p.actions.iter().filter(|a| a.name.starts_with("set-course")).count();
    assert_eq!(courses, 2);
    let fly = &p.actions[p.action_by_name("fly l0").unwrap().0];
    assert_eq!(fly.duration_window(), (30.0, 30.0));
    assert_eq!(fly.continuous.len(), 1);
    assert_eq!(fly.invariant.numeric.len(), 1);
}

const TINY_DOMAIN: &str = "(define (domain d) (:requirements :durative-actions :fluents)
  (:predicates (p) (q))
  (:functions (x))
  (:durative-action a :parameters () :duration (= ?duration 2)
    :condition (at start (p))
    :effect (and (at end (q)) (increase (x) (* #t 3)))))";

#[test]
fn empty_goal_parses() {
    let p = parse_domain_and_problem(
        TINY_DOMAIN,
        "(define (problem e) (:domain d) (:init (p) (= (x) 0)) (:goal (and)))",
    )
    .unwrap();
    assert!(p.goal.is_empty());
}

#[test]
fn nonlinear_rate_is_unsupported() {
    let dom = TINY_DOMAIN.replace("(* #t 3)", "(* #t (^ 2 #t))");
    let err = parse_domain_and_problem(&dom, "(define (problem e) (:domain d) (:init) (:goal (and)))")
        .unwrap_err();
    assert!(err[0].is_unsupported(), "{}", err[0]);
}

#[test]
fn diagnostics_carry_locations() {
    let err = parse_domain_and_problem(
        TINY_DOMAIN,
        "(define (problem e) (:domain d)\n (:init (p))\n (:goal (and (r))))",
    )
    .unwrap_err();
    assert_eq!(err[0].line, 3);
    assert!(err[0].message.contains("undeclared predicate `r`"), "{}", err[0]);

    let err = parse_domain_and_problem("(define (domain d)\n (:requirements :adl))", "").unwrap_err();
    assert!(err[0].is_unsupported());
    assert_eq!((err[0].line, err[0].source), (2, Some("domain")));

    let err = parse_domain_and_problem("(define (domain d) (:predicates (p)", "").unwrap_err();
    assert!(err[0].message.contains("unclosed"));
}

#[test]
fn negative_preconditions_are_unsupported() {
    let dom = TINY_DOMAIN.replace("(at start (p))", "(at start (not (p)))");
    let err = parse_domain_and_problem(&dom, "(define (problem e) (:domain d) (:init) (:goal (and)))")
        .unwrap_err();
    assert!(err[0].is_unsupported());
}

#[test]
fn metric_produces_a_warning() {
    let parsed = parse_with_warnings(
        TINY_DOMAIN,
        "(define (problem e) (:domain d) (:init (= (x) 0)) (:goal (q)) (:metric minimize (total-time)))",
    )
    .unwrap();
    assert_eq!(parsed.warnings.len(), 1);
}
