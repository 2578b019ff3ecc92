//! Weighted A* over snap-actions.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::{
    check_goal, check_state_consistency, schedule, update_bounds, CompileError, Stats, StrategyConfig,
};
use crate::heuristic::Heuristic;
use crate::model::{Problem, SnapEnd};
use crate::plan::{Plan, PlanStep};
use crate::state::SearchState;

pub const DEFAULT_WEIGHT: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strategy: StrategyConfig,
    pub weight: f64,
    pub max_states: Option<u64>,
    pub timeout: Option<Duration>,
    /// Skip states whose propositions, open actions and bounds were already queued.
    pub dedupe: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: StrategyConfig::default(),
            weight: DEFAULT_WEIGHT,
            max_states: None,
            timeout: None,
            dedupe: false,
        }
    }
}

impl SearchConfig {
    pub fn with_strategy(strategy: StrategyConfig) -> Self {
        SearchConfig {
            strategy,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Limit {
    States,
    Time,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SearchOutcome {
    Plan(Plan),
    NoPlan,
    ResourceLimit(Limit),
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error(transparent)]
    Compile(#[from] CompileError),
}

struct Entry {
    f: f64,
    h: f64,
    g: usize,
    seq: u64,
    state: SearchState,
}

impl Entry {
    /// `Less` means popped first.
    fn priority(&self, other: &Self) -> Ordering {
        self.f
            .total_cmp(&other.f)
            .then(self.h.total_cmp(&other.h))
            .then(other.g.cmp(&self.g))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.priority(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap.
        other.priority(self)
    }
}

type StateKey = (Vec<usize>, Vec<usize>, Vec<(i64, i64)>);

fn key(state: &SearchState) -> StateKey {
    let q = |x: f64| {
        if x.is_finite() {
            (x * 1e6).round() as i64
        } else if x > 0.0 {
            i64::MAX
        } else {
            i64::MIN
        }
    };
    let mut open: Vec<usize> = state.open.iter().map(|o| o.action.0).collect();
    open.sort_unstable();
    (
        state.props.ones().collect(),
        open,
        state.bounds.iter().map(|&(lo, hi)| (q(lo), q(hi))).collect(),
    )
}

/// Searches for a plan, counting solver use in `stats`.
pub fn wa_star(problem: &Problem, config: &SearchConfig, stats: &Stats) -> Result<SearchOutcome, SearchError> {
    config.strategy.validate()?;
    let started = Instant::now();
    let root = SearchState::root(problem);
    let estimator = Heuristic::new(problem);
    let Some(h0) = estimator.evaluate(&root) else {
        return Ok(SearchOutcome::NoPlan);
    };
    let mut seen: HashSet<StateKey> = HashSet::new();
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |open: &mut BinaryHeap<Entry>, mut state: SearchState, h: usize| {
        state.h = h as f64;
        open.push(Entry {
            f: state.g as f64 + config.weight * state.h,
            h: state.h,
            g: state.g,
            seq,
            state,
        });
        seq += 1;
    };
    if config.dedupe {
        seen.insert(key(&root));
    }
    push(&mut open, root, h0);

    while let Some(Entry { state, .. }) = open.pop() {
        if let Some(plan) = goal_plan(problem, &state, config, stats)? {
            return Ok(SearchOutcome::Plan(plan));
        }
        if config.max_states.is_some_and(|m| Stats::get(&stats.states_expanded) >= m) {
            return Ok(SearchOutcome::ResourceLimit(Limit::States));
        }
        if config.timeout.is_some_and(|t| started.elapsed() >= t) {
            return Ok(SearchOutcome::ResourceLimit(Limit::Time));
        }
        Stats::bump(&stats.states_expanded);
        for id in state.applicable(problem) {
            let mut child = state.successor(problem, id);
            let check = check_state_consistency(problem, &child, &config.strategy, stats)?;
            if !check.consistent {
                continue;
            }
            child.bounds = update_bounds(problem, &child, &check, &config.strategy, stats)?;
            let Some(h) = estimator.evaluate(&child) else {
                continue;
            };
            if config.dedupe && !seen.insert(key(&child)) {
                continue;
            }
            push(&mut open, child, h);
        }
    }
    Ok(SearchOutcome::NoPlan)
}

/// The plan ending in `state`, when `state` satisfies the goal.
fn goal_plan(
    problem: &Problem,
    state: &SearchState,
    config: &SearchConfig,
    stats: &Stats,
) -> Result<Option<Plan>, SearchError> {
    if !state.open.is_empty() || !problem.goal.propositions.iter().all(|p| state.props.contains(p.0)) {
        return Ok(None);
    }
    if state.trace.is_empty() {
        let holds = problem
            .goal
            .numeric_conditions
            .iter()
            .all(|c| c.holds(&problem.initial.assignments));
        return Ok(holds.then(Plan::default));
    }
    let check = check_goal(problem, state, &config.strategy, stats)?;
    if !check.consistent {
        return Ok(None);
    }
    let times = schedule(&check, stats)?;
    Ok(Some(extract_plan(problem, state, &times)))
}

/// Pairs start and end steps into timestamped plan steps.
pub fn extract_plan(problem: &Problem, state: &SearchState, times: &[f64]) -> Plan {
    let steps = state.trace.to_vec();
    let mut out = Vec::new();
    for (i, step) in steps.iter().enumerate() {
        let snap = problem.snap(step.snap);
        let name = problem.action(snap.action).name.clone();
        match snap.end {
            SnapEnd::Instantaneous => out.push(PlanStep {
                time: times[i],
                action: name,
                duration: None,
            }),
            SnapEnd::Start => {
                let end = steps
                    .iter()
                    .position(|s| s.start_step == Some(i))
                    .expect("goal states have no open actions");
                out.push(PlanStep {
                    time: times[i],
                    action: name,
                    duration: Some(times[end] - times[i]),
                });
            }
            SnapEnd::End => {}
        }
    }
    Plan::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{generate, InstanceSpec};
    use crate::pddl::parse_domain_and_problem;

    fn observer(obs: usize, legs: usize, req: usize) -> Problem {
        let inst = generate(&InstanceSpec::flying_observer(obs, legs, req), 3).unwrap();
        parse_domain_and_problem(&inst.domain, &inst.problem).unwrap()
    }

    #[test]
    fn finds_a_plan_for_a_small_observer_instance() {
        let p = observer(2, 3, 2);
        let stats = Stats::default();
        let out = wa_star(&p, &SearchConfig::default(), &stats).unwrap();
        let SearchOutcome::Plan(plan) = out else {
            panic!("expected a plan, got {out:?}");
        };
        assert!(plan.steps.iter().any(|s| s.action.starts_with("observe")));
        assert!(stats.snapshot().states_expanded > 0);
    }

    #[test]
    fn goal_holding_initially_gives_empty_plan() {
        let mut p = observer(2, 3, 2);
        p.goal.propositions.clear();
        let out = wa_star(&p, &SearchConfig::default(), &Stats::default()).unwrap();
        assert_eq!(out, SearchOutcome::Plan(Plan::default()));
    }

    #[test]
    fn state_budget_is_reported() {
        let p = observer(2, 3, 2);
        let config = SearchConfig {
            max_states: Some(1),
            ..SearchConfig::default()
        };
        let out = wa_star(&p, &config, &Stats::default()).unwrap();
        assert_eq!(out, SearchOutcome::ResourceLimit(Limit::States));
    }
}
