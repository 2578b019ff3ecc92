//! Relaxed planning graph heuristic: delete effects ignored, numeric values
//! tracked as widening intervals, relaxed plan extracted backwards.

use crate::model::{Comparator, EffectMode, LinearCondition, Problem, SnapEnd, SnapId};
use crate::state::{SearchState, BOUND_SLACK};

/// Layers after which a variable still widening is taken to be unbounded in
/// that direction.
const SATURATE_AFTER: usize = 16;

const UNREACHED: usize = usize::MAX;

struct Graph {
    fact_layer: Vec<usize>,
    fact_achiever: Vec<Option<SnapId>>,
    snap_layer: Vec<usize>,
    /// First snap to lower / raise each variable's envelope.
    lowered_by: Vec<Option<SnapId>>,
    raised_by: Vec<Option<SnapId>>,
    env: Vec<(f64, f64)>,
}

fn widen(env: &mut (f64, f64), lo: f64, hi: f64) -> (bool, bool) {
    let down = lo < env.0 - 1e-9;
    let up = hi > env.1 + 1e-9;
    if down {
        env.0 = lo;
    }
    if up {
        env.1 = hi;
    }
    (down, up)
}

fn cond_ok(c: &LinearCondition, env: &[(f64, f64)]) -> bool {
    c.satisfiable_in(env, BOUND_SLACK)
}

/// Per-problem tables reused across evaluations.
pub struct Heuristic<'a> {
    problem: &'a Problem,
    /// Propositions each snap needs; end snaps also need their invariant.
    required: Vec<Vec<usize>>,
    /// Snaps needing each proposition.
    needed_by: Vec<Vec<SnapId>>,
    dmax: Vec<f64>,
    /// Propositions each snap both needs and deletes.
    consumes: Vec<Vec<usize>>,
    /// Snaps spent putting a consumed proposition back: two for a durative
    /// adder, one for an instantaneous one.
    restore_cost: Vec<usize>,
}

impl<'a> Heuristic<'a> {
    pub fn new(problem: &'a Problem) -> Self {
        // Indexed by snap slot; unused end slots of instantaneous actions stay empty.
        let nsnaps = problem.snaps().len();
        let mut required = vec![Vec::new(); nsnaps];
        let mut needed_by = vec![Vec::new(); problem.num_props()];
        let mut dmax = vec![0.0; nsnaps];
        let mut consumes = vec![Vec::new(); nsnaps];
        let mut restore_cost = vec![usize::MAX; problem.num_props()];
        for id in problem.snap_ids() {
            let snap = problem.snap(id);
            let cost = if problem.action(snap.action).is_durative() { 2 } else { 1 };
            for p in &snap.eff.add {
                restore_cost[p.0] = restore_cost[p.0].min(cost);
            }
            consumes[id.0] = snap.pre.props.iter().filter(|p| snap.eff.del.contains(p)).map(|p| p.0).collect();
            let mut props: Vec<usize> = snap.pre.props.iter().map(|p| p.0).collect();
            if snap.end == SnapEnd::End {
                props.extend(snap.invariant.props.iter().map(|p| p.0));
            }
            props.sort_unstable();
            props.dedup();
            for &p in &props {
                needed_by[p].push(id);
            }
            required[id.0] = props;
            dmax[id.0] = problem.action(snap.action).duration_window().1;
        }
        for c in &mut restore_cost {
            if *c == usize::MAX {
                *c = 1;
            }
        }
        Heuristic {
            problem,
            required,
            needed_by,
            dmax,
            consumes,
            restore_cost,
        }
    }

    /// Estimate for `state`, or `None` when the goal is unreachable even
    /// under the relaxation.
    pub fn evaluate(&self, state: &SearchState) -> Option<usize> {
        let goal = &self.problem.goal;
        let satisfied = state.open.is_empty()
            && goal.propositions.iter().all(|p| state.props.contains(p.0))
            && goal.numeric_conditions.iter().all(|c| cond_ok(c, &state.bounds));
        if satisfied {
            return Some(0);
        }
        let g = self.build(state)?;
        let (chosen, count) = extract(self.problem, state, &g);
        // The relaxation lets every consumer of a fact share one copy of
        // it; in reality each further consumer needs the fact put back.
        let mut consumers = vec![0usize; self.restore_cost.len()];
        for (i, _) in chosen.iter().enumerate().filter(|(_, &c)| c) {
            for &p in &self.consumes[i] {
                consumers[p] += 1;
            }
        }
        let restore: usize = consumers
            .iter()
            .zip(&self.restore_cost)
            .map(|(&n, &cost)| n.saturating_sub(1) * cost)
            .sum();
        Some(count + restore)
    }

    fn build(&self, state: &SearchState) -> Option<Graph> {
        let problem = self.problem;
        let nsnaps = problem.snaps().len();
        let mut g = Graph {
            fact_layer: vec![UNREACHED; problem.num_props()],
            fact_achiever: vec![None; problem.num_props()],
            snap_layer: vec![UNREACHED; nsnaps],
            lowered_by: vec![None; problem.num_vars()],
            raised_by: vec![None; problem.num_vars()],
            env: state.bounds.clone(),
        };
        for p in state.props.ones() {
            g.fact_layer[p] = 0;
        }
        // Unmet requirements per snap. An end whose action is not running
        // also waits for its start.
        let mut missing = vec![0usize; nsnaps];
        let mut pending = Vec::new();
        for id in problem.snap_ids() {
            let snap = problem.snap(id);
            let mut m = self.required[id.0].iter().filter(|&&p| g.fact_layer[p] != 0).count();
            if snap.end == SnapEnd::End && !state.is_open(snap.action) {
                m += 1;
            }
            missing[id.0] = m;
            if m == 0 {
                pending.push(id);
            }
        }
        let goal_reached = |g: &Graph| {
            problem.goal.propositions.iter().all(|p| g.fact_layer[p.0] != UNREACHED)
                && problem.goal.numeric_conditions.iter().all(|c| cond_ok(c, &g.env))
                && state
                    .open
                    .iter()
                    .all(|o| g.snap_layer[SnapId::end_of(o.action).0] != UNREACHED)
        };
        let mut movers: Vec<SnapId> = Vec::new();
        let max_layers = SATURATE_AFTER + 2 * nsnaps + 4;
        for layer in 0..max_layers {
            if goal_reached(&g) {
                return Some(g);
            }
            let mut fired = Vec::new();
            pending.retain(|&id| {
                let ok = problem.snap(id).pre.numeric.iter().all(|c| cond_ok(c, &g.env));
                if ok {
                    fired.push(id);
                }
                !ok
            });
            // id order decides which achiever a fact remembers
            fired.sort_unstable_by_key(|id| id.0);
            let mut unlocked = Vec::new();
            for &id in &fired {
                g.snap_layer[id.0] = layer;
                let snap = problem.snap(id);
                for p in &snap.eff.add {
                    if g.fact_layer[p.0] == UNREACHED {
                        g.fact_layer[p.0] = layer + 1;
                        g.fact_achiever[p.0] = Some(id);
                        unlocked.extend(self.needed_by[p.0].iter().copied());
                    }
                }
                if snap.end == SnapEnd::Start && !state.is_open(snap.action) {
                    unlocked.push(SnapId::end_of(snap.action));
                }
                if !snap.eff.numeric.is_empty() || !snap.started_rates.is_empty() {
                    movers.push(id);
                }
            }
            for id in unlocked {
                missing[id.0] -= 1;
                if missing[id.0] == 0 && g.snap_layer[id.0] == UNREACHED {
                    pending.push(id);
                }
            }
            // Every applied snap's numeric effects widen the envelopes again.
            let before = g.env.clone();
            let saturate = layer >= SATURATE_AFTER;
            for &id in &movers {
                let snap = problem.snap(id);
                for e in &snap.eff.numeric {
                    let (elo, ehi) = e.expr.range(&before);
                    let (tlo, thi) = before[e.target.0];
                    let (lo, hi) = match e.mode {
                        EffectMode::Assign => (elo, ehi),
                        EffectMode::Increase => (tlo + elo, thi + ehi),
                        EffectMode::Decrease => (tlo - ehi, thi - elo),
                    };
                    apply_widening(&mut g, id, e.target.0, lo, hi, saturate);
                }
                for e in &snap.started_rates {
                    let delta = e.signed_rate() * self.dmax[id.0];
                    let (tlo, thi) = before[e.target.0];
                    let (lo, hi) = if delta >= 0.0 { (tlo, thi + delta) } else { (tlo + delta, thi) };
                    apply_widening(&mut g, id, e.target.0, lo, hi, saturate);
                }
            }
            if fired.is_empty() && g.env == before {
                break;
            }
        }
        goal_reached(&g).then_some(g)
    }
}

/// One-off estimate; search keeps a [`Heuristic`] instead.
pub fn evaluate(problem: &Problem, state: &SearchState) -> Option<usize> {
    Heuristic::new(problem).evaluate(state)
}

fn apply_widening(g: &mut Graph, id: SnapId, v: usize, lo: f64, hi: f64, saturate: bool) {
    let (down, up) = widen(&mut g.env[v], lo, hi);
    if down {
        g.lowered_by[v].get_or_insert(id);
        if saturate {
            g.env[v].0 = f64::NEG_INFINITY;
        }
    }
    if up {
        g.raised_by[v].get_or_insert(id);
        if saturate {
            g.env[v].1 = f64::INFINITY;
        }
    }
}

/// Snaps of the relaxed plan and their count (at least one).
fn extract(problem: &Problem, state: &SearchState, g: &Graph) -> (Vec<bool>, usize) {
    let mut chosen = vec![false; problem.snaps().len()];
    let mut count = 0;
    let mut agenda: Vec<SnapId> = Vec::new();
    let mut prop_done = vec![false; problem.num_props()];
    let mut props: Vec<usize> = problem.goal.propositions.iter().map(|p| p.0).collect();
    let mut numeric: Vec<&LinearCondition> = problem.goal.numeric_conditions.iter().collect();
    for o in &state.open {
        agenda.push(SnapId::end_of(o.action));
    }
    loop {
        if let Some(id) = agenda.pop() {
            if chosen[id.0] || g.snap_layer[id.0] == UNREACHED {
                continue;
            }
            chosen[id.0] = true;
            count += 1;
            let snap = problem.snap(id);
            props.extend(snap.pre.props.iter().map(|p| p.0));
            numeric.extend(&snap.pre.numeric);
            match snap.end {
                SnapEnd::Start => agenda.push(SnapId::end_of(snap.action)),
                SnapEnd::End => {
                    props.extend(snap.invariant.props.iter().map(|p| p.0));
                    if !state.is_open(snap.action) {
                        agenda.push(SnapId::start_of(snap.action));
                    }
                }
                SnapEnd::Instantaneous => {}
            }
            continue;
        }
        if let Some(p) = props.pop() {
            if prop_done[p] || g.fact_layer[p] == 0 || g.fact_layer[p] == UNREACHED {
                continue;
            }
            prop_done[p] = true;
            if let Some(a) = g.fact_achiever[p] {
                agenda.push(a);
            }
            continue;
        }
        if let Some(c) = numeric.pop() {
            if cond_ok(c, &state.bounds) {
                continue;
            }
            if let Some(a) = numeric_achiever(c, g) {
                agenda.push(a);
            }
            continue;
        }
        break;
    }
    let count = count.max(1);
    (chosen, count)
}

/// First snap moving a condition variable in the direction that helps.
fn numeric_achiever(c: &LinearCondition, g: &Graph) -> Option<SnapId> {
    for &(w, v) in &c.terms {
        let lower = match c.cmp {
            Comparator::Le | Comparator::Lt => w > 0.0,
            Comparator::Ge | Comparator::Gt => w < 0.0,
            Comparator::Eq => {
                if let Some(a) = g.lowered_by[v.0].or(g.raised_by[v.0]) {
                    return Some(a);
                }
                continue;
            }
        };
        let found = if lower { g.lowered_by[v.0] } else { g.raised_by[v.0] };
        if found.is_some() {
            return found;
        }
    }
    None
}
