mod common;

use std::collections::BTreeSet;

use common::golden::{compiled, partial_plan, problem, DOMAIN, EPSILON};
use tnplan::compile::{Compilation, Layout};
use tnplan::lp::Objective;
use tnplan::{parse_domain_and_problem, LpOutcome, Problem, SearchState, SnapId, VarId};

#[test]
fn baseline_layout_chains_from_the_previous_step() {
    common::golden::check_reference(Layout::Baseline).unwrap();
}

#[test]
fn reformulated_layout_chains_from_the_effect_anchor() {
    common::golden::check_reference(Layout::Reformulated).unwrap();
}

fn full_lp_feasible(c: &Compilation) -> bool {
    c.violated.is_none() && matches!(c.lp.solve_feasibility().unwrap(), LpOutcome::Feasible(_))
}

#[test]
fn hand_schedule_satisfies_the_reference_rows() {
    let p = problem(10.0);
    let c = Compilation::build(&p, &partial_plan(&p), Layout::Baseline, EPSILON, false).unwrap();
    let mut point = vec![0.0; c.lp.vars.len()];
    let assign = [
        ("t0", 0.0),
        ("t1", 5.0),
        ("t2", 15.0),
        ("t3", 17.0),
        ("now_flown l0", 17.001),
        ("flown l0_1", 0.0),
        ("flown l0_1'", 0.0),
        ("flown l0_2", 10.0),
        ("flown l0_2'", 10.0),
        ("flown l0_3", 12.0),
        ("flown l0_3'", 12.0),
        ("flown l0_now", 12.001),
    ];
    for (name, value) in assign {
        point[c.lp.var_index(name).unwrap_or_else(|| panic!("{name}"))] = value;
    }
    assert!(c.lp.max_violation(&point) < 1e-9);
    assert!(full_lp_feasible(&c));
    assert!(c.solve_feasibility().unwrap());
}

#[test]
fn target_past_the_leg_is_infeasible() {
    for layout in [Layout::Baseline, Layout::Reformulated] {
        let c = compiled(31.0, layout);
        assert!(!full_lp_feasible(&c), "{layout:?}");
        assert!(!c.solve_feasibility().unwrap(), "{layout:?}");
    }
}

#[test]
fn open_fly_reaches_at_most_the_leg_length() {
    let p = problem(10.0);
    let c = Compilation::build(&p, &partial_plan(&p), Layout::Baseline, EPSILON, false).unwrap();
    let now = c.lp.var_index("flown l0_now").unwrap();
    match c.lp.with_objective(Objective::Maximize(now)).optimize().unwrap() {
        LpOutcome::OptimalValue(v, _) => assert!((v - 30.0).abs() < 1e-6, "{v}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn parallel_flights_keep_separate_chains() {
    let prob = "(define (problem p) (:domain survey)
        (:objects l0 l1 - leg o1 - obs)
        (:init (on-ground) (= (flown l0) 0) (= (flown l1) 0) (= (distance l0) 30) (= (distance l1) 30)
               (= (target-start o1) 10) (= (time-for o1) 2))
        (:goal (observed o1)))";
    let p = parse_domain_and_problem(DOMAIN, prob).unwrap();
    let mut s = SearchState::root(&p);
    for name in ["take-off", "fly l0", "fly l1"] {
        s = s.successor(&p, SnapId::start_of(p.action_by_name(name).unwrap()));
    }
    let c = Compilation::build(&p, &s, Layout::Baseline, EPSILON, false).unwrap();
    for r in &c.lp.rows {
        let legs: BTreeSet<&str> = r
            .terms
            .iter()
            .map(|&(_, j)| c.lp.vars[j].name.as_str())
            .filter_map(|n| n.strip_prefix("flown ").or_else(|| n.strip_prefix("now_flown ")))
            .map(|n| &n[..2])
            .collect();
        assert!(legs.len() <= 1, "row mixes legs: {}", c.lp.render_row(r));
    }
}

fn full_range(c: &Compilation, col: usize) -> (f64, f64) {
    let end = |o| match c.lp.with_objective(o).optimize().unwrap() {
        LpOutcome::OptimalValue(v, _) => v,
        LpOutcome::Unbounded(tnplan::lp::Direction::Positive) => f64::INFINITY,
        LpOutcome::Unbounded(_) => f64::NEG_INFINITY,
        other => panic!("{other:?}"),
    };
    (end(Objective::Minimize(col)), end(Objective::Maximize(col)))
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()))
}

fn targets(p: &Problem, c: &Compilation) -> Vec<usize> {
    (0..p.num_vars()).filter_map(|v| c.target(VarId(v)).map(|(col, _)| col)).collect()
}

#[test]
fn layouts_have_the_same_feasible_values() {
    let corpus = common::corpus(200, 5);
    let mut compared = 0;
    for sample in &corpus.samples {
        let p = &corpus.problems[sample.problem];
        let base = Compilation::build(p, &sample.state, Layout::Baseline, EPSILON, false).unwrap();
        let reform = Compilation::build(p, &sample.state, Layout::Reformulated, EPSILON, false).unwrap();
        let feasible = full_lp_feasible(&base);
        assert_eq!(feasible, full_lp_feasible(&reform), "{:?}", sample.family);
        if !feasible {
            continue;
        }
        let (tb, tr) = (targets(p, &base), targets(p, &reform));
        assert_eq!(tb.len(), tr.len());
        for (&cb, &cr) in tb.iter().zip(&tr) {
            let (b, r) = (full_range(&base, cb), full_range(&reform, cr));
            assert!(close(b.0, r.0) && close(b.1, r.1), "{:?}: {b:?} vs {r:?}", sample.family);
            compared += 1;
        }
    }
    assert!(compared > 300, "{compared}");
}

#[test]
fn projected_program_agrees_with_the_full_program() {
    let corpus = common::corpus(200, 9);
    for sample in &corpus.samples {
        let p = &corpus.problems[sample.problem];
        for layout in [Layout::Baseline, Layout::Reformulated] {
            let c = Compilation::build(p, &sample.state, layout, EPSILON, false).unwrap();
            let feasible = full_lp_feasible(&c);
            assert_eq!(feasible, c.solve_feasibility().unwrap(), "{:?}\n{c}", sample.family);
            if !feasible {
                continue;
            }
            for col in targets(p, &c) {
                let (full, projected) = (full_range(&c, col), c.column_range(col).unwrap().unwrap());
                assert!(
                    close(full.0, projected.0) && close(full.1, projected.1),
                    "{:?}: {full:?} vs {projected:?}",
                    sample.family
                );
            }
        }
    }
}

#[test]
fn single_instantaneous_step_has_only_its_timestamp() {
    let p = problem(10.0);
    let take_off = p.action_by_name("take-off").unwrap();
    let s = SearchState::root(&p).successor(&p, SnapId::start_of(take_off));
    for layout in [Layout::Baseline, Layout::Reformulated] {
        let c = Compilation::build(&p, &s, layout, EPSILON, false).unwrap();
        assert!(common::golden::rows(&c).is_empty(), "{:?}", common::golden::rows(&c));
        let t0 = c.lp.var_index("t0").unwrap();
        assert_eq!(c.lp.vars.len(), 1);
        assert_eq!(c.lp.vars[t0].lower, 0.0);
    }
}

#[test]
fn layouts_coincide_without_continuous_effects() {
    let domain = "
    (define (domain tally) (:requirements :fluents)
      (:predicates (ready))
      (:functions (v))
      (:action prep :parameters () :precondition (and) :effect (ready))
      (:action bump :parameters () :precondition (and (ready) (<= (v) 10)) :effect (increase (v) 2))
      (:action reset :parameters () :precondition (>= (v) 3) :effect (assign (v) 7)))";
    let p = parse_domain_and_problem(domain, "(define (problem t) (:domain tally) (:init (= (v) 1)) (:goal (ready)))")
        .unwrap();
    let mut s = SearchState::root(&p);
    for name in ["prep", "bump", "bump", "reset", "bump"] {
        s = s.successor(&p, SnapId::start_of(p.action_by_name(name).unwrap()));
    }
    let base = Compilation::build(&p, &s, Layout::Baseline, EPSILON, false).unwrap();
    let reform = Compilation::build(&p, &s, Layout::Reformulated, EPSILON, false).unwrap();
    assert_eq!(common::golden::rows(&base), common::golden::rows(&reform));
    assert!(!common::golden::rows(&base).is_empty());
}
