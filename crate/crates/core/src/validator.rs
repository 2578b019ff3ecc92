//! Plan validation by direct simulation.
//!
//! Values change linearly between events and every condition is linear, so
//! a condition that holds at both ends of an event-free interval holds
//! throughout it. Invariants are therefore checked just after each start, at
//! every event inside the action, and just before its end.

use std::fmt;

use thiserror::Error;

use crate::model::{ActionId, Comparator, LinearCondition, Problem, PropId, SnapAction, SnapEnd, SnapId};
use crate::plan::Plan;

/// Slack on numeric conditions and durations.
pub const TOLERANCE: f64 = 1e-5;
/// Interfering events closer than this are rejected.
pub const MIN_SEPARATION: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub enum Validity {
    Valid { makespan: f64 },
    Invalid { time: f64, reason: String },
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid { .. })
    }
}

impl fmt::Display for Validity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Validity::Valid { makespan } => write!(f, "valid plan, makespan {makespan:.6}"),
            Validity::Invalid { time, reason } => write!(f, "invalid at {time:.6}: {reason}"),
        }
    }
}

/// The plan cannot be read against this problem at all.
#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("step {step}: {message}")]
    Malformed { step: usize, message: String },
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    /// Ends sort before instantaneous actions, which sort before starts.
    rank: u8,
    step: usize,
    snap: SnapId,
}

struct Sim<'a> {
    problem: &'a Problem,
    props: Vec<bool>,
    values: Vec<f64>,
    rates: Vec<f64>,
    now: f64,
    open: Vec<ActionId>,
}

fn within(c: &LinearCondition, values: &[f64]) -> bool {
    let lhs: f64 = c.terms.iter().map(|&(w, v)| w * values[v.0]).sum();
    let rhs = c.constant;
    match c.cmp {
        Comparator::Le | Comparator::Lt => lhs <= rhs + TOLERANCE,
        Comparator::Ge | Comparator::Gt => lhs >= rhs - TOLERANCE,
        Comparator::Eq => (lhs - rhs).abs() <= TOLERANCE,
    }
}

impl Sim<'_> {
    fn prop(&self, p: PropId) -> String {
        format!("({})", self.problem.propositions[p.0])
    }

    fn advance(&mut self, t: f64) {
        let dt = t - self.now;
        for (v, r) in self.values.iter_mut().zip(&self.rates) {
            *v += r * dt;
        }
        self.now = t;
    }

    fn check_invariants(&self) -> Result<(), String> {
        for &a in &self.open {
            let action = self.problem.action(a);
            for &p in &action.invariant.props {
                if !self.props[p.0] {
                    return Err(format!("invariant {} of {} violated", self.prop(p), action.name));
                }
            }
            for c in &action.invariant.numeric {
                if !within(c, &self.values) {
                    return Err(format!(
                        "invariant {} of {} violated",
                        self.problem.describe_condition(c),
                        action.name
                    ));
                }
            }
        }
        Ok(())
    }

    fn apply(&mut self, snap: &SnapAction) -> Result<(), String> {
        let action = self.problem.action(snap.action);
        let what = match snap.end {
            SnapEnd::Start => "start of",
            SnapEnd::End => "end of",
            SnapEnd::Instantaneous => "",
        };
        let label = format!("{what} {}", action.name).trim().to_string();
        for &p in &snap.pre.props {
            if !self.props[p.0] {
                return Err(format!("precondition {} of {label} does not hold", self.prop(p)));
            }
        }
        for c in &snap.pre.numeric {
            if !within(c, &self.values) {
                return Err(format!(
                    "precondition {} of {label} does not hold",
                    self.problem.describe_condition(c)
                ));
            }
        }
        match snap.end {
            SnapEnd::Start => {
                if self.open.contains(&snap.action) {
                    return Err(format!("{} overlaps itself", action.name));
                }
                self.open.push(snap.action);
            }
            SnapEnd::End => self.open.retain(|&a| a != snap.action),
            SnapEnd::Instantaneous => {}
        }
        let before = self.values.clone();
        for e in &snap.eff.numeric {
            self.values[e.target.0] = e.apply(&before);
        }
        for &p in &snap.eff.del {
            self.props[p.0] = false;
        }
        for &p in &snap.eff.add {
            self.props[p.0] = true;
        }
        for e in &snap.started_rates {
            self.rates[e.target.0] += e.signed_rate();
        }
        for e in &snap.ended_rates {
            self.rates[e.target.0] -= e.signed_rate();
        }
        Ok(())
    }
}

/// Two snaps whose effects clash with each other's conditions or effects.
fn interfere(a: &SnapAction, b: &SnapAction) -> bool {
    let one_way = |x: &SnapAction, y: &SnapAction| {
        let needs = |p: &PropId| y.required_props().any(|q| q == *p);
        x.eff.del.iter().any(|p| needs(p) || y.eff.add.contains(p))
            || x.written_vars().iter().any(|v| y.own_numeric_vars().contains(v))
    };
    one_way(a, b) || one_way(b, a)
}

pub fn validate(problem: &Problem, plan: &Plan) -> Result<Validity, ValidationError> {
    let mut events = Vec::new();
    for (i, step) in plan.steps.iter().enumerate() {
        let malformed = |message: String| ValidationError::Malformed { step: i + 1, message };
        let a = problem
            .action_by_name(&step.action)
            .ok_or_else(|| malformed(format!("unknown action ({})", step.action)))?;
        if !(step.time.is_finite() && step.time >= 0.0) {
            return Err(malformed(format!("bad time {}", step.time)));
        }
        let action = problem.action(a);
        match (action.is_durative(), step.duration) {
            (true, Some(d)) => {
                if !(d.is_finite() && d >= 0.0) {
                    return Err(malformed(format!("bad duration {d}")));
                }
                events.push(Event {
                    time: step.time,
                    rank: 2,
                    step: i,
                    snap: SnapId::start_of(a),
                });
                events.push(Event {
                    time: step.time + d,
                    rank: 0,
                    step: i,
                    snap: SnapId::end_of(a),
                });
            }
            (false, None) => events.push(Event {
                time: step.time,
                rank: 1,
                step: i,
                snap: SnapId::start_of(a),
            }),
            (true, None) => return Err(malformed(format!("{} needs a duration", action.name))),
            (false, Some(_)) => return Err(malformed(format!("{} is instantaneous", action.name))),
        }
    }

    for step in &plan.steps {
        let Some(d) = step.duration else { continue };
        let (lo, hi) = problem.action(problem.action_by_name(&step.action).expect("checked")).duration_window();
        if d < lo - TOLERANCE || d > hi + TOLERANCE {
            return Ok(Validity::Invalid {
                time: step.time,
                reason: format!("duration {d:.6} of {} outside [{lo}, {hi}]", step.action),
            });
        }
    }

    events.sort_by(|x, y| {
        x.time
            .total_cmp(&y.time)
            .then(x.rank.cmp(&y.rank))
            .then(x.step.cmp(&y.step))
    });
    for (i, x) in events.iter().enumerate() {
        for y in events[i + 1..].iter().take_while(|y| y.time - x.time < MIN_SEPARATION) {
            if x.step != y.step && interfere(problem.snap(x.snap), problem.snap(y.snap)) {
                return Ok(Validity::Invalid {
                    time: y.time,
                    reason: format!(
                        "{} and {} interfere and are closer than {MIN_SEPARATION}",
                        plan.steps[x.step].action, plan.steps[y.step].action
                    ),
                });
            }
        }
    }

    let mut props = vec![false; problem.num_props()];
    for p in &problem.initial.true_propositions {
        props[p.0] = true;
    }
    let mut sim = Sim {
        problem,
        props,
        values: problem.initial.assignments.clone(),
        rates: vec![0.0; problem.num_vars()],
        now: 0.0,
        open: Vec::new(),
    };
    let mut i = 0;
    while i < events.len() {
        let t = events[i].time;
        sim.advance(t);
        let invalid = |reason| Ok(Validity::Invalid { time: t, reason });
        // state just before the events at t, i.e. the end of the open interval
        if let Err(reason) = sim.check_invariants() {
            return invalid(reason);
        }
        while i < events.len() && events[i].time == t {
            if let Err(reason) = sim.apply(problem.snap(events[i].snap)) {
                return invalid(reason);
            }
            i += 1;
        }
        if let Err(reason) = sim.check_invariants() {
            return invalid(reason);
        }
    }

    let makespan = sim.now;
    for &p in &problem.goal.propositions {
        if !sim.props[p.0] {
            return Ok(Validity::Invalid {
                time: makespan,
                reason: format!("goal {} not reached", sim.prop(p)),
            });
        }
    }
    for c in &problem.goal.numeric_conditions {
        if !within(c, &sim.values) {
            return Ok(Validity::Invalid {
                time: makespan,
                reason: format!("goal {} not reached", problem.describe_condition(c)),
            });
        }
    }
    Ok(Validity::Valid { makespan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{generate, InstanceSpec};
    use crate::pddl::{parse_domain_and_problem, read_plan};

    fn observer() -> Problem {
        let inst = generate(&InstanceSpec::flying_observer(2, 3, 2), 1).unwrap();
        parse_domain_and_problem(&inst.domain, &inst.problem).unwrap()
    }

    // o0 on l0: target-start 16, 2 long, options e0/e2
    const NESTED: &str = "\
0.000: (take-off l0) [5.000]
5.001: (fly l0) [30.000]
0.000: (configure o0 e0) [1.000]
21.002: (observe l0 o0) [2.000]
23.003: (release o0 e0) [1.000]
";

    #[test]
    fn observation_nested_in_flight_is_valid_up_to_goal() {
        let mut p = observer();
        let o1 = p.prop_by_name("observed o1").unwrap();
        p.goal.propositions.retain(|&q| q != o1);
        let plan = read_plan(NESTED).unwrap();
        assert!(validate(&p, &plan).unwrap().is_valid(), "{:?}", validate(&p, &plan));
    }

    #[test]
    fn observation_running_past_the_leg_breaks_the_flying_invariant() {
        let p = observer();
        let shifted = NESTED
            .replace("21.002: (observe l0 o0)", "34.500: (observe l0 o0)")
            .replace("23.003: (release", "36.501: (release");
        let plan = read_plan(&shifted).unwrap();
        match validate(&p, &plan).unwrap() {
            Validity::Invalid { reason, .. } => assert!(reason.contains("invariant (flying l0)"), "{reason}"),
            v => panic!("expected invalid, got {v:?}"),
        }
    }

    #[test]
    fn empty_plan_against_empty_goal() {
        let mut p = observer();
        p.goal.propositions.clear();
        assert_eq!(validate(&p, &Plan::default()).unwrap(), Validity::Valid { makespan: 0.0 });
    }

    #[test]
    fn early_observation_fails_distance_precondition() {
        let p = observer();
        let plan = read_plan(&NESTED.replace("21.002", "10.000")).unwrap();
        match validate(&p, &plan).unwrap() {
            Validity::Invalid { reason, .. } => assert!(reason.contains("flown l0"), "{reason}"),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn unknown_action_is_malformed() {
        let p = observer();
        let plan = read_plan("0.0: (teleport l0) [1.0]\n").unwrap();
        assert!(matches!(validate(&p, &plan), Err(ValidationError::Malformed { step: 1, .. })));
    }

    #[test]
    fn wrong_duration_is_invalid() {
        let p = observer();
        let plan = read_plan("0.0: (take-off l0) [4.0]\n").unwrap();
        assert!(!validate(&p, &plan).unwrap().is_valid());
    }
}
