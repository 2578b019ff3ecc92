//! Search states: propositions, numeric bounds and the partial plan.
//!
//! The partial plan is a persistent list of steps shared between a state and
//! its successors. Each step records the ordering predecessors derived when it
//! was appended; the temporal network is rebuilt from them on demand.

use std::sync::Arc;

use fixedbitset::FixedBitSet;

use crate::model::{
    ActionId, ConditionSet, EffectMode, Problem, PropId, SnapEnd, SnapId, VarId,
};

/// Slack when testing numeric preconditions against bounds.
pub const BOUND_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub snap: SnapId,
    /// Index of the matching start step, for end snaps.
    pub start_step: Option<usize>,
    /// Steps this one is ordered after by at least epsilon.
    pub preds: Vec<usize>,
    /// Start steps of open actions whose invariants are enforced here.
    pub enforced: Vec<usize>,
    /// Variables read, including enforced invariants.
    pub reads: Vec<VarId>,
    /// Variables changed instantaneously or by a rate change.
    pub writes: Vec<VarId>,
    /// Every step this one is transitively ordered after.
    pub ancestors: FixedBitSet,
}

impl Step {
    pub fn touches(&self, v: VarId) -> bool {
        self.reads.contains(&v) || self.writes.contains(&v)
    }
}

#[derive(Debug)]
struct TraceNode {
    step: Arc<Step>,
    prev: Option<Arc<TraceNode>>,
}

/// Persistent list of plan steps.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    last: Option<Arc<TraceNode>>,
    len: usize,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&self, step: Step) -> Trace {
        Trace {
            last: Some(Arc::new(TraceNode {
                step: Arc::new(step),
                prev: self.last.clone(),
            })),
            len: self.len + 1,
        }
    }

    /// Steps in plan order.
    pub fn to_vec(&self) -> Vec<Arc<Step>> {
        let mut out = Vec::with_capacity(self.len);
        let mut cur = self.last.as_ref();
        while let Some(n) = cur {
            out.push(n.step.clone());
            cur = n.prev.as_ref();
        }
        out.reverse();
        out
    }

    pub fn last(&self) -> Option<&Step> {
        self.last.as_ref().map(|n| n.step.as_ref())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpenAction {
    pub action: ActionId,
    pub start_step: usize,
}

#[derive(Clone, Debug)]
pub struct SearchState {
    pub props: FixedBitSet,
    /// Per-variable `(min, max)`.
    pub bounds: Vec<(f64, f64)>,
    /// The parent's bounds, before this step's discrete effects.
    pub parent_bounds: Vec<(f64, f64)>,
    pub trace: Trace,
    pub open: Vec<OpenAction>,
    /// Sum of active rates per variable.
    pub active_rates: Vec<f64>,
    pub g: usize,
    pub h: f64,
}

fn holds_all(props: &FixedBitSet, ps: &[PropId]) -> bool {
    ps.iter().all(|p| props.contains(p.0))
}

fn numeric_ok(cs: &ConditionSet, bounds: &[(f64, f64)]) -> bool {
    cs.numeric.iter().all(|c| c.satisfiable_in(bounds, BOUND_SLACK))
}

impl SearchState {
    pub fn root(problem: &Problem) -> SearchState {
        let mut props = FixedBitSet::with_capacity(problem.num_props());
        for p in &problem.initial.true_propositions {
            props.insert(p.0);
        }
        let bounds: Vec<(f64, f64)> = problem.initial.assignments.iter().map(|&v| (v, v)).collect();
        SearchState {
            props,
            parent_bounds: bounds.clone(),
            bounds,
            trace: Trace::default(),
            open: Vec::new(),
            active_rates: vec![0.0; problem.num_vars()],
            g: 0,
            h: 0.0,
        }
    }

    pub fn latest_snap(&self) -> Option<SnapId> {
        self.trace.last().map(|s| s.snap)
    }

    pub fn is_open(&self, a: ActionId) -> bool {
        self.open.iter().any(|o| o.action == a)
    }

    /// Snaps whose propositional and bound-level numeric preconditions hold.
    pub fn applicable(&self, problem: &Problem) -> Vec<SnapId> {
        problem
            .snap_ids()
            .filter(|&id| self.is_applicable(problem, id))
            .collect()
    }

    pub fn is_applicable(&self, problem: &Problem, id: SnapId) -> bool {
        let snap = problem.snap(id);
        let a = snap.action;
        match snap.end {
            SnapEnd::End => {
                if !self.is_open(a) {
                    return false;
                }
            }
            SnapEnd::Start | SnapEnd::Instantaneous => {
                if self.is_open(a) {
                    return false;
                }
            }
        }
        if !holds_all(&self.props, &snap.pre.props) || !numeric_ok(&snap.pre, &self.bounds) {
            return false;
        }
        // other open actions keep their invariants
        for o in &self.open {
            if o.action == a {
                continue;
            }
            let inv = &problem.action(o.action).invariant.props;
            if snap.eff.del.iter().any(|d| inv.contains(d) && !snap.eff.add.contains(d)) {
                return false;
            }
        }
        if snap.end == SnapEnd::Start {
            let after = self.apply_props(problem, id);
            if !holds_all(&after, &snap.invariant.props) {
                return false;
            }
            if !numeric_ok(&snap.invariant, &self.discrete_bounds(problem, id)) {
                return false;
            }
        }
        true
    }

    fn apply_props(&self, problem: &Problem, id: SnapId) -> FixedBitSet {
        let snap = problem.snap(id);
        let mut props = self.props.clone();
        for d in &snap.eff.del {
            props.set(d.0, false);
        }
        for p in &snap.eff.add {
            props.insert(p.0);
        }
        props
    }

    /// Bounds after applying a snap's discrete effects to both ends.
    pub fn discrete_bounds(&self, problem: &Problem, id: SnapId) -> Vec<(f64, f64)> {
        let snap = problem.snap(id);
        let mut out = self.bounds.clone();
        for e in &snap.eff.numeric {
            let (lo, hi) = e.expr.range(&self.bounds);
            let (tlo, thi) = self.bounds[e.target.0];
            out[e.target.0] = match e.mode {
                EffectMode::Assign => (lo, hi),
                EffectMode::Increase => (tlo + lo, thi + hi),
                EffectMode::Decrease => (tlo - hi, thi - lo),
            };
        }
        out
    }

    /// Applies a snap: propositions, discrete bounds, rates and a new step
    /// with its ordering obligations. Consistency is not checked here.
    pub fn successor(&self, problem: &Problem, id: SnapId) -> SearchState {
        let snap = problem.snap(id);
        let steps = self.trace.to_vec();
        let n = steps.len();
        let start_step = if snap.end == SnapEnd::End {
            self.open.iter().find(|o| o.action == snap.action).map(|o| o.start_step)
        } else {
            None
        };

        let mut preds: Vec<usize> = start_step.into_iter().collect();
        let required: Vec<PropId> = snap.required_props().collect();
        let changed: Vec<PropId> = snap.eff.add.iter().chain(&snap.eff.del).copied().collect();
        let mut last_adder: Vec<Option<usize>> = vec![None; required.len()];
        for (k, step) in steps.iter().enumerate() {
            let other = problem.snap(step.snap);
            for (r, p) in required.iter().enumerate() {
                if other.eff.add.contains(p) {
                    last_adder[r] = Some(k);
                }
            }
            let deletes_needed = other.required_props().any(|q| snap.eff.del.contains(&q));
            let interferes = other
                .eff
                .add
                .iter()
                .chain(&other.eff.del)
                .any(|p| changed.contains(p));
            if deletes_needed || interferes {
                preds.push(k);
            }
        }
        preds.extend(last_adder.into_iter().flatten());

        let writes = snap.written_vars();
        let mut reads: Vec<VarId> = snap
            .own_numeric_vars()
            .into_iter()
            .filter(|v| !writes.contains(v))
            .collect();
        let mut enforced = Vec::new();
        loop {
            add_numeric_preds(&steps, &reads, &writes, &mut preds);
            preds.sort_unstable();
            preds.dedup();
            let ancestors = ancestors_of(&steps, &preds, n);
            let mut grew = false;
            for o in &self.open {
                if o.action == snap.action || enforced.contains(&o.start_step) {
                    continue;
                }
                if !ancestors.contains(o.start_step) {
                    continue;
                }
                let inv = &problem.action(o.action).invariant;
                if inv.numeric.is_empty() {
                    continue;
                }
                enforced.push(o.start_step);
                for v in inv.numeric_vars() {
                    if !reads.contains(&v) && !writes.contains(&v) {
                        reads.push(v);
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        reads.sort_unstable();
        reads.dedup();
        enforced.sort_unstable();
        let ancestors = ancestors_of(&steps, &preds, n);

        let step = Step {
            snap: id,
            start_step,
            preds,
            enforced,
            reads,
            writes,
            ancestors,
        };

        let mut open = self.open.clone();
        match snap.end {
            SnapEnd::Start => open.push(OpenAction {
                action: snap.action,
                start_step: n,
            }),
            SnapEnd::End => open.retain(|o| o.action != snap.action),
            SnapEnd::Instantaneous => {}
        }
        let mut active_rates = self.active_rates.clone();
        for e in &snap.started_rates {
            active_rates[e.target.0] += e.signed_rate();
        }
        for e in &snap.ended_rates {
            active_rates[e.target.0] -= e.signed_rate();
        }
        for r in active_rates.iter_mut() {
            if r.abs() < 1e-12 {
                *r = 0.0;
            }
        }

        SearchState {
            props: self.apply_props(problem, id),
            bounds: self.discrete_bounds(problem, id),
            parent_bounds: self.bounds.clone(),
            trace: self.trace.push(step),
            open,
            active_rates,
            g: self.g + 1,
            h: 0.0,
        }
    }
}

fn add_numeric_preds(steps: &[Arc<Step>], reads: &[VarId], writes: &[VarId], preds: &mut Vec<usize>) {
    for v in reads {
        if let Some(k) = steps.iter().rposition(|s| s.writes.contains(v)) {
            preds.push(k);
        }
    }
    for v in writes {
        for (k, s) in steps.iter().enumerate() {
            if s.touches(*v) {
                preds.push(k);
            }
        }
    }
}

fn ancestors_of(steps: &[Arc<Step>], preds: &[usize], n: usize) -> FixedBitSet {
    let mut set = FixedBitSet::with_capacity(n);
    for &p in preds {
        set.insert(p);
        set.union_with(&steps[p].ancestors);
    }
    set
}
