//! A four-step survey plan whose constraint set is known row by row.

use std::collections::BTreeSet;

use tnplan::compile::{Compilation, Layout};
use tnplan::model::SnapEnd;
use tnplan::{check_state_consistency, update_bounds, Stats, StrategyConfig};
use tnplan::{parse_domain_and_problem, Problem, SearchState, SnapId};

/// Take-off, fly l0 start, observe start, observe end.
const PLAN: [(&str, SnapEnd); 4] = [
    ("take-off", SnapEnd::Instantaneous),
    ("fly l0", SnapEnd::Start),
    ("observe o1 l0", SnapEnd::Start),
    ("observe o1 l0", SnapEnd::End),
];

pub const DOMAIN: &str = "
(define (domain survey)
  (:requirements :typing :durative-actions :fluents)
  (:types leg obs)
  (:predicates (on-ground) (airborne) (flying ?l - leg) (observed ?o - obs))
  (:functions (flown ?l - leg) (distance ?l - leg) (target-start ?o - obs) (time-for ?o - obs))
  (:action take-off
    :parameters ()
    :precondition (on-ground)
    :effect (and (not (on-ground)) (airborne)))
  (:durative-action fly
    :parameters (?l - leg)
    :duration (= ?duration (distance ?l))
    :condition (and (at start (airborne)) (over all (<= (flown ?l) (distance ?l))))
    :effect (and (at start (flying ?l)) (at end (not (flying ?l)))
                 (increase (flown ?l) (* #t 1))))
  (:durative-action observe
    :parameters (?o - obs ?l - leg)
    :duration (<= ?duration (time-for ?o))
    :condition (and (at start (>= (flown ?l) (target-start ?o))) (over all (flying ?l)))
    :effect (at end (observed ?o))))
";

pub fn problem(target_start: f64) -> Problem {
    let prob = format!(
        "(define (problem p) (:domain survey)
           (:objects l0 - leg o1 - obs)
           (:init (on-ground) (= (flown l0) 0) (= (distance l0) 30)
                  (= (target-start o1) {target_start}) (= (time-for o1) 2))
           (:goal (observed o1)))"
    );
    parse_domain_and_problem(DOMAIN, &prob).unwrap()
}

pub fn partial_plan(p: &Problem) -> SearchState {
    let (config, stats) = (StrategyConfig::baseline(), Stats::default());
    let mut s = SearchState::root(p);
    for (name, end) in PLAN {
        let a = p.action_by_name(name).unwrap();
        let id = if end == SnapEnd::End { SnapId::end_of(a) } else { SnapId::start_of(a) };
        assert!(s.is_applicable(p, id), "{name}");
        s = s.successor(p, id);
        let check = check_state_consistency(p, &s, &config, &stats).unwrap();
        assert!(check.consistent, "{name}");
        s.bounds = update_bounds(p, &s, &check, &config, &stats).unwrap();
    }
    s
}

pub const EPSILON: f64 = 0.001;

pub fn rows(c: &Compilation) -> BTreeSet<String> {
    c.lp.rows.iter().map(|r| c.lp.render_row(r)).collect()
}

fn set(rows: &[&str]) -> BTreeSet<String> {
    rows.iter().map(|r| r.to_string()).collect()
}

/// Rows common to both layouts, in the compiler's naming: `t{i}` is step i,
/// `flown l0_{i}` and `flown l0_{i}'` the value before and after it.
const SHARED: [&str; 16] = [
    "1 t1 - 1 t0 >= 0.001",
    "1 t2 - 1 t1 >= 0.001",
    "1 t3 - 1 t2 >= 0.001",
    "1 t3 - 1 t2 <= 2",
    "1 flown l0_1 = 0",
    "1 flown l0_1' - 1 flown l0_1 = 0",
    "1 flown l0_1' <= 30",
    "1 flown l0_2 - 1 flown l0_1' - 1 t2 + 1 t1 = 0",
    "1 flown l0_2 >= 10",
    "1 flown l0_2 <= 30",
    "1 flown l0_2' - 1 flown l0_2 = 0",
    "1 flown l0_2' <= 30",
    "1 flown l0_3' - 1 flown l0_3 = 0",
    "1 flown l0_3 <= 30",
    "1 flown l0_3' <= 30",
    "1 now_flown l0 - 1 t1 >= 0.001",
];

const NOW_AFTER_LATER_STEPS: [&str; 2] = ["1 now_flown l0 - 1 t2 >= 0.001", "1 now_flown l0 - 1 t3 >= 0.001"];

/// The reference tables also restate the start precondition on the value
/// after observe starts, which the value-after equality already implies.
const RESTATED: &str = "1 flown l0_2' >= 10";

/// Rows the compiler adds that the reference tables leave out: an ordering
/// implied by transitivity, the lower duration bound of observe, and the
/// horizon of the open fly.
const ADDED: [&str; 3] = [
    "1 t3 - 1 t1 >= 0.001",
    "1 t3 - 1 t2 >= 0",
    "1 now_flown l0 - 1 t1 <= 30",
];

/// Value rows that differ between the layouts.
pub fn layout_rows(layout: Layout) -> [&'static str; 2] {
    match layout {
        Layout::Baseline => [
            "1 flown l0_3 - 1 flown l0_2' - 1 t3 + 1 t2 = 0",
            "1 flown l0_now - 1 flown l0_3' - 1 now_flown l0 + 1 t3 = 0",
        ],
        Layout::Reformulated => [
            "1 flown l0_3 - 1 flown l0_1' - 1 t3 + 1 t1 = 0",
            "1 flown l0_now - 1 flown l0_1' - 1 now_flown l0 + 1 t1 = 0",
        ],
    }
}

/// Row-by-row comparison of the compiled partial plan with the reference
/// constraint set of `layout`.
pub fn check_reference(layout: Layout) -> Result<(), String> {
    let p = problem(10.0);
    let c = Compilation::build(&p, &partial_plan(&p), layout, EPSILON, false).unwrap();
    let mut expected = set(&SHARED);
    expected.extend(set(&NOW_AFTER_LATER_STEPS));
    expected.extend(set(&layout_rows(layout)));
    expected.insert(RESTATED.to_string());
    let actual = rows(&c);
    let missing: BTreeSet<_> = expected.difference(&actual).cloned().collect();
    let extra: BTreeSet<_> = actual.difference(&expected).cloned().collect();
    if missing != set(&[RESTATED]) {
        return Err(format!("{layout:?}: missing rows {missing:?}"));
    }
    if extra != set(&ADDED) {
        return Err(format!("{layout:?}: unexpected rows {extra:?}"));
    }
    let t0 = c.lp.var_index("t0").ok_or("no t0 column")?;
    if c.lp.vars[t0].lower != 0.0 {
        return Err("t0 is not bounded below by zero".into());
    }
    Ok(())
}

/// The partial plan compiled under `layout` with the given target start.
pub fn compiled(target_start: f64, layout: Layout) -> Compilation {
    let p = problem(target_start);
    Compilation::build(&p, &unchecked_plan(&p), layout, EPSILON, false).unwrap()
}

/// The partial plan without consistency checks between steps.
pub fn unchecked_plan(p: &Problem) -> SearchState {
    let mut s = SearchState::root(p);
    for (name, end) in PLAN {
        let a = p.action_by_name(name).unwrap();
        s = s.successor(p, if end == SnapEnd::End { SnapId::end_of(a) } else { SnapId::start_of(a) });
    }
    s
}


