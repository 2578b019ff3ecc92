//! Compilation of partial plans into temporal and linear constraints, and the
//! consistency / bound-update pipeline built on it.
//!
//! Every step `i` gets a timestamp `t_i`. Each variable a step touches gets a
//! value just before (`v_i`) and just after (`v'_i`) the step. Values are
//! chained through time with the rate in force: the baseline layout chains
//! from the previous step touching `v`, the reformulated layout from the last
//! step that changed `v` (its effect anchor). Variables with continuous
//! effects still running get a `now` timestamp ordered after their touchers.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{Direction, LinearProgram, LpError, LpOutcome, Objective, STRICT_MARGIN};
use crate::model::{
    Comparator, EffectMode, LinearCondition, Problem, SnapAction, SnapEnd, VarId,
};
use crate::state::{SearchState, Step};
use crate::stn::{NodeId, Stn, StnError, ZERO};

pub const DEFAULT_EPSILON: f64 = 0.001;
/// Widening applied to inherited bounds before they are used as LP hints.
const HINT_WIDENING: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    /// Decide states whose latest snap is purely propositional with the STN.
    pub sec31: bool,
    /// Convert single-variable numeric conditions to temporal constraints.
    pub sec32: bool,
    /// Choose bound-update strategies from the latest snap.
    pub sec33: bool,
    pub epsilon: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self::optic_ii()
    }
}

impl StrategyConfig {
    pub const PRESETS: [&'static str; 6] = ["baseline", "sec31", "sec31-32", "sec33", "sec31-33", "optic-ii"];

    const fn with(sec31: bool, sec32: bool, sec33: bool) -> Self {
        StrategyConfig {
            sec31,
            sec32,
            sec33,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub const fn baseline() -> Self {
        Self::with(false, false, false)
    }

    pub const fn optic_ii() -> Self {
        Self::with(true, true, true)
    }

    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "baseline" => Self::baseline(),
            "sec31" => Self::with(true, false, false),
            "sec31-32" => Self::with(true, true, false),
            "sec33" => Self::with(false, false, true),
            "sec31-33" => Self::with(true, false, true),
            "optic-ii" => Self::optic_ii(),
            _ => return None,
        })
    }

    pub fn name(&self) -> String {
        match (self.sec31, self.sec32, self.sec33) {
            (false, false, false) => "baseline".into(),
            (true, false, false) => "sec31".into(),
            (true, true, false) => "sec31-32".into(),
            (false, false, true) => "sec33".into(),
            (true, false, true) => "sec31-33".into(),
            (true, true, true) => "optic-ii".into(),
            (false, true, _) => "invalid".into(),
        }
    }

    pub fn validate(&self) -> Result<(), CompileError> {
        if self.sec32 && !self.sec31 {
            return Err(CompileError::Config(
                "temporal conversion requires latest-action selection to be enabled".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CompileError::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CompileError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Stn(#[from] StnError),
}

/// Shared counters; safe to bump from several threads.
#[derive(Debug, Default)]
pub struct Stats {
    pub states_expanded: AtomicU64,
    pub stn_only_decisions: AtomicU64,
    pub conversions: AtomicU64,
    pub lp_feasibility_calls: AtomicU64,
    pub lp_optimize_calls: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsSnapshot {
    pub states_expanded: u64,
    pub stn_only_decisions: u64,
    pub conversions: u64,
    pub lp_feasibility_calls: u64,
    pub lp_optimize_calls: u64,
}

impl Stats {
    pub fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(counter: &AtomicU64) -> u64 {
        counter.load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        let get = |c: &AtomicU64| c.load(Ordering::Relaxed);
        StatsSnapshot {
            states_expanded: get(&self.states_expanded),
            stn_only_decisions: get(&self.stn_only_decisions),
            conversions: get(&self.conversions),
            lp_feasibility_calls: get(&self.lp_feasibility_calls),
            lp_optimize_calls: get(&self.lp_optimize_calls),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ActionClass {
    PropositionalTemporalOnly,
    NumericConstraintsOnly,
    InstantNumericEffect,
    ContinuousRateChange,
}

/// The most numeric feature a snap carries.
pub fn classify_latest(snap: &SnapAction) -> ActionClass {
    if snap.changes_rates() {
        ActionClass::ContinuousRateChange
    } else if !snap.eff.numeric.is_empty() {
        ActionClass::InstantNumericEffect
    } else if !snap.pre.numeric.is_empty()
        || (snap.end != SnapEnd::Instantaneous && !snap.invariant.numeric.is_empty())
    {
        ActionClass::NumericConstraintsOnly
    } else {
        ActionClass::PropositionalTemporalOnly
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Baseline,
    Reformulated,
}

/// Where a condition is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Point {
    Pre(usize),
    Post(usize),
    Now(VarId),
    /// After the last step, with no effect running.
    Final,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowRole {
    Precondition,
    Invariant,
    Goal,
}

/// A variable's value at a point, as far as it is determined by time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ValueForm {
    Known(f64),
    /// `base + rate * (t_to - t_from)`
    Linear {
        base: f64,
        rate: f64,
        from: NodeId,
        to: NodeId,
    },
    Symbolic,
}

impl ValueForm {
    fn shifted(self, c: f64) -> ValueForm {
        match self {
            ValueForm::Known(v) => ValueForm::Known(v + c),
            ValueForm::Linear { base, rate, from, to } => ValueForm::Linear {
                base: base + c,
                rate,
                from,
                to,
            },
            ValueForm::Symbolic => ValueForm::Symbolic,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionRow {
    pub condition: LinearCondition,
    pub point: Point,
    pub role: RowRole,
    /// Value form of each condition variable at the point, in term order.
    pub forms: Vec<ValueForm>,
}

/// `constant + sum(coef * t_node)` over timestamps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(NodeId, f64)>,
    pub constant: f64,
}

impl Affine {
    fn node(n: NodeId) -> Affine {
        Affine {
            terms: vec![(n, 1.0)],
            constant: 0.0,
        }
    }

    fn constant(c: f64) -> Affine {
        Affine {
            terms: Vec::new(),
            constant: c,
        }
    }

    fn add_scaled(&mut self, other: &Affine, k: f64) {
        if k == 0.0 {
            return;
        }
        self.constant += k * other.constant;
        for &(n, c) in &other.terms {
            match self.terms.binary_search_by_key(&n, |&(m, _)| m) {
                Ok(i) => self.terms[i].1 += k * c,
                Err(i) => self.terms.insert(i, (n, k * c)),
            }
        }
        self.terms.retain(|&(_, c)| c.abs() > 1e-12);
    }

    fn add_node(&mut self, n: NodeId, k: f64) {
        self.add_scaled(&Affine::node(n), k);
    }
}

#[derive(Clone, Copy, Debug)]
struct Chain {
    /// Post column and node of the last step touching the variable.
    toucher: Option<(usize, NodeId)>,
    /// Post column and node of the last step changing the variable.
    writer: Option<(usize, NodeId)>,
    rate: f64,
    anchor: ValueForm,
    anchor_node: NodeId,
}

impl Chain {
    fn form_at(&self, node: NodeId) -> ValueForm {
        if self.rate == 0.0 {
            return self.anchor;
        }
        match self.anchor {
            ValueForm::Known(base) => ValueForm::Linear {
                base,
                rate: self.rate,
                from: self.anchor_node,
                to: node,
            },
            _ => ValueForm::Symbolic,
        }
    }
}

type RowKey = (Vec<(u64, usize)>, Comparator, u64);

/// Constraints of one partial plan.
#[derive(Clone, Debug)]
pub struct Compilation {
    pub layout: Layout,
    pub epsilon: f64,
    /// Ordering and duration constraints, including the `now` nodes.
    pub stn: Stn,
    pub lp: LinearProgram,
    pub conditions: Vec<ConditionRow>,
    /// One node per step (`step + 1`).
    pub steps: usize,
    pub now_nodes: Vec<(VarId, NodeId)>,
    /// A condition over constants only that does not hold.
    pub violated: Option<String>,
    time_cols: Vec<usize>,
    /// Every LP column as a function of the timestamps.
    affine: Vec<Affine>,
    /// Numeric condition rows over timestamps: `expr cmp rhs`.
    numeric_rows: Vec<(Affine, Comparator, f64)>,
    /// Column and form of the value each variable's bounds are about.
    targets: Vec<Option<(usize, ValueForm)>>,
    /// Start node and maximum duration of the only open effect on a variable.
    sole_effect: Vec<Option<(NodeId, f64)>>,
}

struct Builder<'a> {
    problem: &'a Problem,
    stn: Stn,
    lp: LinearProgram,
    time_cols: Vec<usize>,
    affine: Vec<Affine>,
    numeric_rows: Vec<(Affine, Comparator, f64)>,
}

impl Builder<'_> {
    fn temporal(
        &mut self,
        from: NodeId,
        to: NodeId,
        lb: f64,
        ub: f64,
        label: &'static str,
    ) -> Result<(), CompileError> {
        self.stn.add_constraint(from, to, lb, ub)?;
        let terms = vec![(1.0, self.time_cols[to]), (-1.0, self.time_cols[from])];
        if lb.is_finite() {
            self.lp.add_row(terms.clone(), Comparator::Ge, lb, label);
        }
        if ub.is_finite() {
            self.lp.add_row(terms, Comparator::Le, ub, label);
        }
        Ok(())
    }

    fn time_node(&mut self, name: String) -> NodeId {
        let node = self.stn.add_node();
        self.time_cols.push(self.lp.add_bounded_var(name, 0.0, f64::INFINITY));
        self.affine.push(Affine::node(node));
        debug_assert_eq!(self.time_cols.len(), node + 1);
        node
    }

    fn value_col(&mut self, name: String, affine: Affine) -> usize {
        self.affine.push(affine);
        self.lp.add_var(name)
    }

    fn condition_row(&mut self, terms: Vec<(f64, usize)>, cmp: Comparator, rhs: f64, label: &'static str) {
        let mut expr = Affine::default();
        for &(w, col) in &terms {
            let a = self.affine[col].clone();
            expr.add_scaled(&a, w);
        }
        self.numeric_rows.push((expr, cmp, rhs));
        self.lp.add_row(terms, cmp, rhs, label);
    }

    fn chain_value(&self, chain: &Chain, layout: Layout, node: NodeId, init: f64) -> Affine {
        match Self::reference(chain, layout) {
            None => Affine::constant(init),
            Some((pc, pn)) => {
                let mut a = self.affine[pc].clone();
                a.add_node(node, chain.rate);
                a.add_node(pn, -chain.rate);
                a
            }
        }
    }

    fn reference(chain: &Chain, layout: Layout) -> Option<(usize, NodeId)> {
        match layout {
            Layout::Baseline => chain.toucher,
            Layout::Reformulated => chain.writer,
        }
    }

    /// `value = reference + rate * (t_node - t_reference)`, or the initial value.
    fn chain_row(&mut self, col: usize, chain: &Chain, layout: Layout, node: NodeId, init: f64) {
        match Self::reference(chain, layout) {
            None => self.lp.add_row(vec![(1.0, col)], Comparator::Eq, init, "value"),
            Some((pc, pn)) => {
                let mut terms = vec![(1.0, col), (-1.0, pc)];
                if chain.rate != 0.0 {
                    terms.push((-chain.rate, self.time_cols[node]));
                    terms.push((chain.rate, self.time_cols[pn]));
                }
                self.lp.add_row(terms, Comparator::Eq, 0.0, "value");
            }
        }
    }
}

/// Core ordering and duration network of a list of steps.
fn core_stn(problem: &Problem, steps: &[Arc<Step>], epsilon: f64) -> Result<Stn, CompileError> {
    let mut stn = Stn::new();
    for _ in steps {
        stn.add_node();
    }
    for (j, step) in steps.iter().enumerate() {
        for &k in &step.preds {
            stn.add_constraint(k + 1, j + 1, epsilon, f64::INFINITY)?;
        }
        if let Some(s) = step.start_step {
            let (lo, hi) = problem.action(problem.snap(step.snap).action).duration_window();
            stn.add_constraint(s + 1, j + 1, lo, hi)?;
        }
    }
    Ok(stn)
}

fn holds_with_margin(lhs: f64, cmp: Comparator, rhs: f64) -> bool {
    let tol = 1e-9;
    match cmp {
        Comparator::Le => lhs <= rhs + tol,
        Comparator::Lt => lhs <= rhs - STRICT_MARGIN + tol,
        Comparator::Eq => (lhs - rhs).abs() <= tol,
        Comparator::Ge => lhs >= rhs - tol,
        Comparator::Gt => lhs >= rhs + STRICT_MARGIN - tol,
    }
}

impl Compilation {
    /// Compiles the partial plan of `state`. With `goal` set, the problem's
    /// numeric goal conditions are added at the end of the plan.
    pub fn build(
        problem: &Problem,
        state: &SearchState,
        layout: Layout,
        epsilon: f64,
        goal: bool,
    ) -> Result<Compilation, CompileError> {
        let steps = state.trace.to_vec();
        let nv = problem.num_vars();
        let init = &problem.initial.assignments;
        let mut b = Builder {
            problem,
            stn: Stn::new(),
            lp: LinearProgram::new(),
            time_cols: vec![usize::MAX],
            affine: Vec::new(),
            numeric_rows: Vec::new(),
        };
        for i in 0..steps.len() {
            b.time_node(format!("t{i}"));
        }
        for (j, step) in steps.iter().enumerate() {
            for &k in &step.preds {
                b.temporal(k + 1, j + 1, epsilon, f64::INFINITY, "order")?;
            }
            if let Some(s) = step.start_step {
                let action = b.problem.snap(step.snap).action;
                let (lo, hi) = b.problem.action(action).duration_window();
                b.temporal(s + 1, j + 1, lo, hi, "duration")?;
            }
        }

        let mut chains: Vec<Chain> = (0..nv)
            .map(|v| Chain {
                toucher: None,
                writer: None,
                rate: 0.0,
                anchor: ValueForm::Known(init[v]),
                anchor_node: ZERO,
            })
            .collect();
        let mut conditions = Vec::new();
        let mut violated = None;
        let mut last_post: Vec<Option<(usize, ValueForm)>> = vec![None; nv];

        for (i, step) in steps.iter().enumerate() {
            let node = i + 1;
            let snap = problem.snap(step.snap);
            let mut touched: Vec<VarId> = step.reads.iter().chain(&step.writes).copied().collect();
            touched.sort();
            touched.dedup();

            let mut pre: HashMap<VarId, (usize, ValueForm)> = HashMap::new();
            for &v in &touched {
                let name = &problem.variables[v.0];
                let value = b.chain_value(&chains[v.0], layout, node, init[v.0]);
                let col = b.value_col(format!("{name}_{i}"), value);
                b.chain_row(col, &chains[v.0], layout, node, init[v.0]);
                pre.insert(v, (col, chains[v.0].form_at(node)));
            }
            let mut post: HashMap<VarId, (usize, ValueForm)> = HashMap::new();
            for &v in &touched {
                let name = &problem.variables[v.0];
                let col = b.value_col(format!("{name}_{i}'"), Affine::default());
                let effects: Vec<_> = snap.eff.numeric.iter().filter(|e| e.target == v).collect();
                let form = if effects.is_empty() {
                    b.lp.add_row(vec![(1.0, col), (-1.0, pre[&v].0)], Comparator::Eq, 0.0, "value");
                    b.affine[col] = b.affine[pre[&v].0].clone();
                    pre[&v].1
                } else {
                    // Fold the effects into one expression over pre-values.
                    let mut coef: HashMap<VarId, f64> = HashMap::from([(v, 1.0)]);
                    let mut constant = 0.0;
                    for e in effects {
                        let sign = match e.mode {
                            EffectMode::Assign => {
                                coef.clear();
                                constant = 0.0;
                                1.0
                            }
                            EffectMode::Increase => 1.0,
                            EffectMode::Decrease => -1.0,
                        };
                        for &(w, x) in &e.expr.terms {
                            *coef.entry(x).or_insert(0.0) += sign * w;
                        }
                        constant += sign * e.expr.constant;
                    }
                    coef.retain(|_, w| *w != 0.0);
                    let mut terms = vec![(1.0, col)];
                    let mut residual = Vec::new();
                    let mut known = constant;
                    let mut value = Affine::constant(constant);
                    let mut sorted: Vec<_> = coef.into_iter().collect();
                    sorted.sort_by_key(|&(x, _)| x);
                    for (x, w) in sorted {
                        terms.push((-w, pre[&x].0));
                        let a = b.affine[pre[&x].0].clone();
                        value.add_scaled(&a, w);
                        match pre[&x].1 {
                            ValueForm::Known(c) => known += w * c,
                            f => residual.push((w, x, f)),
                        }
                    }
                    b.lp.add_row(terms, Comparator::Eq, constant, "effect");
                    b.affine[col] = value;
                    match residual.as_slice() {
                        [] => ValueForm::Known(known),
                        [(w, x, f)] if *w == 1.0 && *x == v => f.shifted(known),
                        _ => ValueForm::Symbolic,
                    }
                };
                post.insert(v, (col, form));
            }

            let mut add_condition = |b: &mut Builder, cond: &LinearCondition, point: Point, role: RowRole| {
                let values = match point {
                    Point::Pre(_) => &pre,
                    _ => &post,
                };
                let terms: Vec<(f64, usize)> = cond.terms.iter().map(|&(w, x)| (w, values[&x].0)).collect();
                let forms = cond.terms.iter().map(|&(_, x)| values[&x].1).collect();
                let label = match role {
                    RowRole::Precondition => "precondition",
                    _ => "invariant",
                };
                b.condition_row(terms, cond.cmp, cond.constant, label);
                conditions.push(ConditionRow {
                    condition: cond.clone(),
                    point,
                    role,
                    forms,
                });
            };
            for c in &snap.pre.numeric {
                add_condition(&mut b, c, Point::Pre(i), RowRole::Precondition);
            }
            for c in &snap.invariant.numeric {
                match snap.end {
                    SnapEnd::Start => add_condition(&mut b, c, Point::Post(i), RowRole::Invariant),
                    SnapEnd::End => add_condition(&mut b, c, Point::Pre(i), RowRole::Invariant),
                    SnapEnd::Instantaneous => {}
                }
            }
            for &s in &step.enforced {
                let action = problem.snap(steps[s].snap).action;
                for c in &problem.action(action).invariant.numeric {
                    add_condition(&mut b, c, Point::Pre(i), RowRole::Invariant);
                    add_condition(&mut b, c, Point::Post(i), RowRole::Invariant);
                }
            }

            for &v in &touched {
                let (col, form) = post[&v];
                let chain = &mut chains[v.0];
                chain.toucher = Some((col, node));
                last_post[v.0] = Some((col, form));
                if step.writes.contains(&v) {
                    chain.writer = Some((col, node));
                    chain.anchor = form;
                    chain.anchor_node = node;
                    for e in &snap.started_rates {
                        if e.target == v {
                            chain.rate += e.signed_rate();
                        }
                    }
                    for e in &snap.ended_rates {
                        if e.target == v {
                            chain.rate -= e.signed_rate();
                        }
                    }
                    if chain.rate.abs() < 1e-12 {
                        chain.rate = 0.0;
                    }
                }
            }
        }

        // Open continuous effects: a `now` point per affected variable.
        let mut now_nodes = Vec::new();
        let mut targets = last_post;
        let mut sole_effect = vec![None; nv];
        for v in (0..nv).map(VarId) {
            let acting: Vec<_> = state
                .open
                .iter()
                .filter(|o| problem.action(o.action).continuous.iter().any(|e| e.target == v))
                .collect();
            if acting.is_empty() {
                continue;
            }
            let node = b.time_node(format!("now_{}", problem.variables[v.0]));
            now_nodes.push((v, node));
            for (k, step) in steps.iter().enumerate() {
                if step.touches(v) {
                    b.temporal(k + 1, node, epsilon, f64::INFINITY, "order")?;
                }
            }
            for o in &acting {
                let (_, hi) = problem.action(o.action).duration_window();
                if hi.is_finite() {
                    b.temporal(o.start_step + 1, node, f64::NEG_INFINITY, hi, "duration")?;
                }
            }
            if let [o] = acting.as_slice() {
                let effects = problem.action(o.action).continuous.iter().filter(|e| e.target == v).count();
                if effects == 1 {
                    sole_effect[v.0] = Some((o.start_step + 1, problem.action(o.action).duration_window().1));
                }
            }
            let value = b.chain_value(&chains[v.0], layout, node, init[v.0]);
            let col = b.value_col(format!("{}_now", problem.variables[v.0]), value);
            b.chain_row(col, &chains[v.0], layout, node, init[v.0]);
            targets[v.0] = Some((col, chains[v.0].form_at(node)));
        }

        if goal {
            for c in &problem.goal.numeric_conditions {
                let mut terms = Vec::new();
                let mut forms = Vec::new();
                let mut rhs = c.constant;
                for &(w, x) in &c.terms {
                    match targets[x.0] {
                        Some((col, form)) => {
                            terms.push((w, col));
                            forms.push(form);
                        }
                        None => {
                            rhs -= w * init[x.0];
                            forms.push(ValueForm::Known(init[x.0]));
                        }
                    }
                }
                if terms.is_empty() {
                    if !holds_with_margin(0.0, c.cmp, rhs) {
                        violated = Some(problem.describe_condition(c));
                    }
                } else {
                    b.condition_row(terms, c.cmp, rhs, "goal");
                }
                conditions.push(ConditionRow {
                    condition: c.clone(),
                    point: Point::Final,
                    role: RowRole::Goal,
                    forms,
                });
            }
        }

        Ok(Compilation {
            layout,
            epsilon,
            stn: b.stn,
            lp: b.lp,
            conditions,
            steps: steps.len(),
            now_nodes,
            violated,
            time_cols: b.time_cols,
            affine: b.affine,
            numeric_rows: b.numeric_rows,
            targets,
            sole_effect,
        })
    }

    pub fn has_numeric(&self) -> bool {
        !self.conditions.is_empty()
    }

    /// LP column of a timestamp node.
    pub fn time_column(&self, node: NodeId) -> Option<usize> {
        self.time_cols.get(node).copied().filter(|&c| c != usize::MAX)
    }

    /// LP column holding the value the bounds of `v` describe, if any step
    /// touched `v`.
    pub fn target(&self, v: VarId) -> Option<(usize, ValueForm)> {
        self.targets[v.0]
    }
}

/// Tolerance for merging rigidly linked timestamps and dropping implied edges.
const RIGID_TOLERANCE: f64 = 1e-9;

/// The compiled program projected onto the timestamps its numeric rows
/// mention. Values are affine in time, and the ordering network projects
/// exactly onto any node subset through shortest paths, so this program has
/// the same feasible timings and optima as the full one.
struct Reduced {
    lp: LinearProgram,
    /// Relevant node -> (leader, offset); leader `ZERO` means a fixed time.
    placement: HashMap<NodeId, (NodeId, f64)>,
    leader_cols: HashMap<NodeId, usize>,
    objective: Option<usize>,
    violated: bool,
}

impl Reduced {
    fn substitute(&self, expr: &Affine) -> (Vec<(f64, usize)>, f64) {
        let mut constant = expr.constant;
        let mut terms: Vec<(f64, usize)> = Vec::new();
        for &(n, c) in &expr.terms {
            let (leader, offset) = self.placement[&n];
            constant += c * offset;
            if leader == ZERO {
                continue;
            }
            let col = self.leader_cols[&leader];
            match terms.iter_mut().find(|(_, k)| *k == col) {
                Some(t) => t.0 += c,
                None => terms.push((c, col)),
            }
        }
        terms.retain(|&(c, _)| c.abs() > 1e-12);
        terms.sort_by_key(|&(_, k)| k);
        (terms, constant)
    }

    fn node_value(&self, point: &[f64], node: NodeId) -> f64 {
        let (leader, offset) = self.placement[&node];
        if leader == ZERO {
            offset
        } else {
            point[self.leader_cols[&leader]] + offset
        }
    }
}

fn holds_within(lhs: f64, cmp: Comparator, rhs: f64) -> bool {
    let tol = crate::lp::LP_TOLERANCE;
    match cmp {
        Comparator::Le => lhs <= rhs + tol,
        Comparator::Lt => lhs <= rhs - STRICT_MARGIN + tol,
        Comparator::Eq => (lhs - rhs).abs() <= tol,
        Comparator::Ge => lhs >= rhs - tol,
        Comparator::Gt => lhs >= rhs + STRICT_MARGIN - tol,
    }
}

impl Compilation {
    /// Numeric rows as functions of the timestamps.
    pub fn numeric_rows(&self) -> &[(Affine, Comparator, f64)] {
        &self.numeric_rows
    }

    /// A column of the full program as a function of the timestamps.
    pub fn column_affine(&self, col: usize) -> &Affine {
        &self.affine[col]
    }

    fn reduce(&self, objective: Option<&Affine>, hint: Option<(f64, f64)>) -> Reduced {
        let mut relevant: Vec<NodeId> = self
            .numeric_rows
            .iter()
            .map(|(a, _, _)| a)
            .chain(objective)
            .flat_map(|a| a.terms.iter().map(|&(n, _)| n))
            .filter(|&n| n != ZERO)
            .collect();
        relevant.sort_unstable();
        relevant.dedup();

        let mut dist: HashMap<NodeId, Vec<f64>> = HashMap::new();
        dist.insert(ZERO, self.stn.distances_from(ZERO));
        for &r in &relevant {
            dist.insert(r, self.stn.distances_from(r));
        }
        let d = |a: NodeId, b: NodeId| dist[&a][b];

        let mut placement = HashMap::new();
        let mut leaders: Vec<NodeId> = Vec::new();
        'nodes: for &r in &relevant {
            for u in std::iter::once(ZERO).chain(leaders.iter().copied()) {
                let (there, back) = (d(u, r), d(r, u));
                if there.is_finite() && back.is_finite() && (there + back).abs() <= RIGID_TOLERANCE {
                    placement.insert(r, (u, there));
                    continue 'nodes;
                }
            }
            placement.insert(r, (r, 0.0));
            leaders.push(r);
        }

        let mut lp = LinearProgram::new();
        let mut leader_cols = HashMap::new();
        for &l in &leaders {
            leader_cols.insert(l, lp.add_var(format!("t{l}")));
        }
        let keyed: Vec<NodeId> = std::iter::once(ZERO).chain(leaders.iter().copied()).collect();
        for &a in &keyed {
            for &b in &keyed {
                let w = d(a, b);
                if a == b || !w.is_finite() {
                    continue;
                }
                let implied = keyed
                    .iter()
                    .any(|&c| c != a && c != b && d(a, c) + d(c, b) <= w + RIGID_TOLERANCE);
                if implied {
                    continue;
                }
                let mut terms = Vec::new();
                if b != ZERO {
                    terms.push((1.0, leader_cols[&b]));
                }
                if a != ZERO {
                    terms.push((-1.0, leader_cols[&a]));
                }
                lp.add_row(terms, Comparator::Le, w, "order");
            }
        }

        let mut reduced = Reduced {
            lp,
            placement,
            leader_cols,
            objective: None,
            violated: false,
        };
        // Rows already added, by bit pattern, to skip exact repeats.
        let mut seen: Vec<RowKey> = Vec::new();
        for (expr, cmp, rhs) in &self.numeric_rows {
            let (terms, constant) = reduced.substitute(expr);
            let rhs = rhs - constant;
            if terms.is_empty() {
                if !holds_within(0.0, *cmp, rhs) {
                    reduced.violated = true;
                }
                continue;
            }
            let key = (terms.iter().map(|&(c, k)| (c.to_bits(), k)).collect(), *cmp, rhs.to_bits());
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
            reduced.lp.add_row(terms, *cmp, rhs, "condition");
        }
        if let Some(expr) = objective {
            let (mut terms, constant) = reduced.substitute(expr);
            let z = match hint {
                Some((lo, hi)) => reduced.lp.add_bounded_var("objective", lo, hi),
                None => reduced.lp.add_var("objective"),
            };
            for t in terms.iter_mut() {
                t.0 = -t.0;
            }
            terms.insert(0, (1.0, z));
            reduced.lp.add_row(terms, Comparator::Eq, constant, "objective");
            reduced.objective = Some(z);
        }
        reduced
    }

    /// Feasibility of the numeric rows together with the ordering network.
    pub fn solve_feasibility(&self) -> Result<bool, LpError> {
        if !self.stn.is_consistent() {
            return Ok(false);
        }
        let r = self.reduce(None, None);
        if r.violated {
            return Ok(false);
        }
        match r.lp.solve_feasibility()? {
            LpOutcome::Feasible(_) => Ok(true),
            LpOutcome::Infeasible => Ok(false),
            other => Err(LpError::Invalid(format!("unexpected feasibility outcome {other:?}"))),
        }
    }

    /// Smallest and largest value of a column over the feasible set, by way
    /// of the projected program. `None` when infeasible.
    pub fn column_range(&self, col: usize) -> Result<Option<(f64, f64)>, LpError> {
        let expr = self.column_affine(col).clone();
        let lo = self.optimize_affine(&expr, false, None)?;
        let hi = self.optimize_affine(&expr, true, None)?;
        Ok(lo.zip(hi).map(|(lo, hi)| (lo.0, hi.0)))
    }

    /// Optimum of an affine function of the timestamps, or `None` when the
    /// program (with the hint on the objective value) is infeasible.
    fn optimize_affine(
        &self,
        expr: &Affine,
        maximize: bool,
        hint: Option<(f64, f64)>,
    ) -> Result<Option<(f64, Reduced, Vec<f64>)>, LpError> {
        if !self.stn.is_consistent() {
            return Ok(None);
        }
        let r = self.reduce(Some(expr), hint);
        if r.violated {
            return Ok(None);
        }
        let z = r.objective.expect("objective column");
        let objective = if maximize { Objective::Maximize(z) } else { Objective::Minimize(z) };
        Ok(match r.lp.with_objective(objective).optimize()? {
            LpOutcome::OptimalValue(x, point) => Some((x, r, point)),
            LpOutcome::Unbounded(dir) => {
                let x = if dir == Direction::Positive { f64::INFINITY } else { f64::NEG_INFINITY };
                Some((x, r, Vec::new()))
            }
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Conversion {
    /// Every numeric condition became a temporal constraint (or held outright).
    Converted(Vec<crate::stn::TemporalConstraint>),
    /// A condition over fixed values fails whatever the timing.
    Violated(String),
    NotConvertible(Vec<String>),
}

/// Rewrites each numeric condition as a bound on the time elapsed since the
/// variable's anchor, when the anchored value is known.
pub fn try_convert_to_temporal(problem: &Problem, comp: &Compilation) -> Conversion {
    use crate::stn::TemporalConstraint;
    if let Some(c) = &comp.violated {
        return Conversion::Violated(c.clone());
    }
    let mut out = Vec::new();
    let mut blocking = Vec::new();
    for row in &comp.conditions {
        let c = &row.condition;
        let (a, form) = match (c.terms.as_slice(), row.forms.as_slice()) {
            ([(a, _)], [form]) => (*a, *form),
            _ => {
                // Every term fixed: evaluate outright.
                let fixed: Option<f64> = c
                    .terms
                    .iter()
                    .zip(&row.forms)
                    .map(|(&(w, _), f)| match f {
                        ValueForm::Known(x) => Some(w * x),
                        _ => None,
                    })
                    .sum();
                match fixed {
                    Some(lhs) if !holds_with_margin(lhs, c.cmp, c.constant) => {
                        return Conversion::Violated(problem.describe_condition(c));
                    }
                    Some(_) => {}
                    None => blocking.push(format!("{} (several variables)", problem.describe_condition(c))),
                }
                continue;
            }
        };
        match form {
            ValueForm::Known(x) => {
                if !holds_with_margin(a * x, c.cmp, c.constant) {
                    return Conversion::Violated(problem.describe_condition(c));
                }
            }
            ValueForm::Linear { base, rate, from, to } => {
                let k = a * rate;
                if k.abs() < 1e-12 {
                    if !holds_with_margin(a * base, c.cmp, c.constant) {
                        return Conversion::Violated(problem.describe_condition(c));
                    }
                    continue;
                }
                let mut rhs = c.constant - a * base;
                let closed = match c.cmp {
                    Comparator::Lt => {
                        rhs -= STRICT_MARGIN;
                        Comparator::Le
                    }
                    Comparator::Gt => {
                        rhs += STRICT_MARGIN;
                        Comparator::Ge
                    }
                    other => other,
                };
                let cmp = if k < 0.0 { closed.flipped() } else { closed };
                let x = rhs / k;
                let (lb, ub) = match cmp {
                    Comparator::Le => (f64::NEG_INFINITY, x),
                    Comparator::Ge => (x, f64::INFINITY),
                    _ => (x, x),
                };
                out.push(TemporalConstraint { from, to, lb, ub });
            }
            ValueForm::Symbolic => {
                blocking.push(format!("{} (value not fixed by timing)", problem.describe_condition(c)));
            }
        }
    }
    if blocking.is_empty() {
        Conversion::Converted(out)
    } else {
        Conversion::NotConvertible(blocking)
    }
}

/// Which procedure settled a consistency check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decider {
    Stn,
    LatestSelection,
    Conversion,
    Lp,
}

#[derive(Clone, Debug)]
pub struct Check {
    pub consistent: bool,
    pub decided_by: Decider,
    pub compilation: Compilation,
    /// Ordering network with the converted conditions added.
    pub converted: Option<Stn>,
    pub blocking: Vec<String>,
}

pub fn layout_for(config: &StrategyConfig) -> Layout {
    if config.sec32 {
        Layout::Reformulated
    } else {
        Layout::Baseline
    }
}

pub fn check_state_consistency(
    problem: &Problem,
    state: &SearchState,
    config: &StrategyConfig,
    stats: &Stats,
) -> Result<Check, CompileError> {
    check(problem, state, config, stats, false)
}

/// Consistency of the plan with the numeric goal conditions added.
pub fn check_goal(
    problem: &Problem,
    state: &SearchState,
    config: &StrategyConfig,
    stats: &Stats,
) -> Result<Check, CompileError> {
    check(problem, state, config, stats, true)
}

fn check(
    problem: &Problem,
    state: &SearchState,
    config: &StrategyConfig,
    stats: &Stats,
    goal: bool,
) -> Result<Check, CompileError> {
    let compilation = Compilation::build(problem, state, layout_for(config), config.epsilon, goal)?;
    let decided = |consistent, decided_by, compilation, converted, blocking| Check {
        consistent,
        decided_by,
        compilation,
        converted,
        blocking,
    };
    if !compilation.stn.is_consistent() {
        Stats::bump(&stats.stn_only_decisions);
        return Ok(decided(false, Decider::Stn, compilation, None, Vec::new()));
    }
    if let Some(c) = &compilation.violated {
        let blocking = vec![c.clone()];
        Stats::bump(&stats.stn_only_decisions);
        return Ok(decided(false, Decider::Stn, compilation, None, blocking));
    }
    if !compilation.has_numeric() {
        Stats::bump(&stats.stn_only_decisions);
        let stn = compilation.stn.clone();
        return Ok(decided(true, Decider::Stn, compilation, Some(stn), Vec::new()));
    }
    if config.sec31 && !goal && latest_is_harmless(problem, state, config.epsilon)? {
        Stats::bump(&stats.stn_only_decisions);
        return Ok(decided(true, Decider::LatestSelection, compilation, None, Vec::new()));
    }
    let mut blocking = Vec::new();
    if config.sec32 {
        match try_convert_to_temporal(problem, &compilation) {
            Conversion::Converted(extra) => {
                Stats::bump(&stats.conversions);
                let mut stn = compilation.stn.clone();
                let mut ok = true;
                for c in extra {
                    if stn.add(c).is_err() {
                        ok = false;
                        break;
                    }
                }
                let ok = ok && stn.is_consistent();
                return Ok(decided(ok, Decider::Conversion, compilation, ok.then_some(stn), Vec::new()));
            }
            Conversion::Violated(c) => {
                Stats::bump(&stats.conversions);
                return Ok(decided(false, Decider::Conversion, compilation, None, vec![c]));
            }
            Conversion::NotConvertible(b) => blocking = b,
        }
    }
    Stats::bump(&stats.lp_feasibility_calls);
    let consistent = compilation.solve_feasibility()?;
    Ok(decided(consistent, Decider::Lp, compilation, None, blocking))
}

/// The latest step cannot affect numeric feasibility: it has no numeric
/// content, enforces no invariant, and (for an end) its duration limit adds
/// nothing the earlier steps did not already imply.
fn latest_is_harmless(problem: &Problem, state: &SearchState, epsilon: f64) -> Result<bool, CompileError> {
    let Some(latest) = state.trace.last() else {
        return Ok(false);
    };
    let snap = problem.snap(latest.snap);
    if classify_latest(snap) != ActionClass::PropositionalTemporalOnly || !latest.enforced.is_empty() {
        return Ok(false);
    }
    let Some(s) = latest.start_step else {
        return Ok(true);
    };
    let (_, hi) = problem.action(snap.action).duration_window();
    if !hi.is_finite() {
        return Ok(true);
    }
    let steps = state.trace.to_vec();
    let parent = core_stn(problem, &steps[..steps.len() - 1], epsilon)?;
    let dist = parent.distances_from(s + 1);
    Ok(latest
        .preds
        .iter()
        .filter(|&&k| k != s)
        .all(|&k| dist[k + 1] <= hi - epsilon + 1e-9))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundStrategy {
    NoUpdateNeeded,
    ClosedForm,
    LpWithInheritedBounds,
    LpUnbounded,
}

/// Per-variable strategy; `None` for variables no step has touched.
pub fn plan_bound_updates(
    problem: &Problem,
    state: &SearchState,
    check: &Check,
    config: &StrategyConfig,
) -> Vec<Option<BoundStrategy>> {
    let latest = state.trace.last();
    let snap = latest.map(|s| problem.snap(s.snap));
    let closed_available = check.converted.is_some()
        || (config.sec33 && matches!(try_convert_to_temporal(problem, &check.compilation), Conversion::Converted(_)));
    (0..problem.num_vars())
        .map(VarId)
        .map(|v| {
            let (_, form) = check.compilation.target(v)?;
            if !config.sec33 {
                return Some(BoundStrategy::LpUnbounded);
            }
            if check.decided_by == Decider::LatestSelection || latest.is_some_and(|s| !s.touches(v)) {
                return Some(BoundStrategy::NoUpdateNeeded);
            }
            if closed_available && !matches!(form, ValueForm::Symbolic) {
                return Some(BoundStrategy::ClosedForm);
            }
            let written = snap.is_some_and(|s| s.written_vars().contains(&v));
            Some(if written {
                BoundStrategy::LpUnbounded
            } else {
                BoundStrategy::LpWithInheritedBounds
            })
        })
        .collect()
}

/// New per-variable `(min, max)` for a state judged consistent.
pub fn update_bounds(
    problem: &Problem,
    state: &SearchState,
    check: &Check,
    config: &StrategyConfig,
    stats: &Stats,
) -> Result<Vec<(f64, f64)>, CompileError> {
    if check.decided_by == Decider::LatestSelection {
        return Ok(state.parent_bounds.clone());
    }
    let plan = plan_bound_updates(problem, state, check, config);
    let mut converted: Option<Stn> = check.converted.clone();
    if converted.is_none() && plan.contains(&Some(BoundStrategy::ClosedForm)) {
        if let Conversion::Converted(extra) = try_convert_to_temporal(problem, &check.compilation) {
            let mut stn = check.compilation.stn.clone();
            for c in extra {
                stn.add(c)?;
            }
            converted = Some(stn);
        }
    }
    let mut out = state.bounds.clone();
    for (v, strategy) in plan.iter().enumerate() {
        let Some(strategy) = strategy else { continue };
        let (col, form) = check.compilation.targets[v].expect("planned variables have targets");
        out[v] = match strategy {
            BoundStrategy::NoUpdateNeeded => state.parent_bounds[v],
            BoundStrategy::ClosedForm => {
                let stn = converted.as_ref().expect("closed form needs the converted network");
                closed_form(form, stn, check.compilation.sole_effect[v])
            }
            BoundStrategy::LpUnbounded => lp_range(&check.compilation, col, None, stats)?,
            BoundStrategy::LpWithInheritedBounds => {
                let (lo, hi) = state.parent_bounds[v];
                let widen = |x: f64| HINT_WIDENING * (1.0 + x.abs());
                let hint = (lo - widen(lo), hi + widen(hi));
                lp_range(&check.compilation, col, Some(hint), stats)?
            }
        };
    }
    Ok(out)
}

fn closed_form(form: ValueForm, stn: &Stn, sole: Option<(NodeId, f64)>) -> (f64, f64) {
    match form {
        ValueForm::Known(x) => (x, x),
        ValueForm::Linear { base, rate, from, to } => {
            let (lo, mut hi) = stn.interval(from, to);
            if !hi.is_finite() {
                if let Some((_, dmax)) = sole.filter(|&(s, _)| s == from) {
                    hi = dmax;
                }
            }
            let lo = lo.max(0.0);
            let (a, b) = (base + rate * lo, base + rate * hi);
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        }
        ValueForm::Symbolic => (f64::NEG_INFINITY, f64::INFINITY),
    }
}

/// Minimum and maximum of one column. Hints that make the program
/// infeasible are dropped and the solve repeated.
fn lp_range(
    comp: &Compilation,
    col: usize,
    hint: Option<(f64, f64)>,
    stats: &Stats,
) -> Result<(f64, f64), CompileError> {
    if hint.is_some() {
        if let Some(range) = lp_extremes(comp, col, hint, stats)? {
            return Ok(range);
        }
    }
    lp_extremes(comp, col, None, stats)?
        .ok_or_else(|| LpError::Invalid("bound update on an infeasible program".into()).into())
}

fn lp_extremes(
    comp: &Compilation,
    col: usize,
    hint: Option<(f64, f64)>,
    stats: &Stats,
) -> Result<Option<(f64, f64)>, CompileError> {
    let expr = comp.column_affine(col);
    let mut out = [0.0; 2];
    for (slot, maximize) in [(0, false), (1, true)] {
        Stats::bump(&stats.lp_optimize_calls);
        match comp.optimize_affine(expr, maximize, hint)? {
            Some((x, _, _)) => out[slot] = x,
            None => return Ok(None),
        }
    }
    Ok(Some((out[0], out[1])))
}

/// Start time of every step in a consistent plan.
pub fn schedule(check: &Check, stats: &Stats) -> Result<Vec<f64>, CompileError> {
    let comp = &check.compilation;
    let n = comp.steps;
    let earliest = |stn: &Stn| match stn.check_consistency() {
        crate::stn::StnVerdict::Consistent(times) => Some(times[..n].to_vec()),
        _ => None,
    };
    if let Some(times) = check.converted.as_ref().and_then(earliest) {
        return Ok(times);
    }
    // Pin the timestamps the numeric rows mention to an optimal solution,
    // then take earliest times for the rest.
    let mut total = Affine::default();
    for (expr, _, _) in &comp.numeric_rows {
        for &(node, _) in &expr.terms {
            if !total.terms.iter().any(|&(m, _)| m == node) {
                total.add_node(node, 1.0);
            }
        }
    }
    Stats::bump(&stats.lp_optimize_calls);
    let Some((_, reduced, point)) = comp.optimize_affine(&total, false, None)? else {
        return Err(LpError::Invalid("no schedule for a consistent plan".into()).into());
    };
    for slack in [1e-6, 1e-5, 1e-4] {
        let mut stn = comp.stn.clone();
        let pinned = total.terms.iter().all(|&(node, _)| {
            let x = reduced.node_value(&point, node);
            stn.add_constraint(ZERO, node, (x - slack).max(0.0), x + slack).is_ok()
        });
        if let Some(times) = pinned.then(|| earliest(&stn)).flatten() {
            return Ok(times);
        }
    }
    Err(LpError::Invalid("could not turn the solution into a schedule".into()).into())
}

impl fmt::Display for Compilation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.lp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{generate, InstanceSpec};
    use crate::model::{ActionId, SnapId};
    use crate::pddl::parse_domain_and_problem;

    fn observer() -> Problem {
        let inst = generate(&InstanceSpec::flying_observer(2, 3, 2), 1).unwrap();
        parse_domain_and_problem(&inst.domain, &inst.problem).unwrap()
    }

    fn snap(p: &Problem, name: &str, end: SnapEnd) -> SnapId {
        let a: ActionId = p.action_by_name(name).unwrap_or_else(|| panic!("no action {name}"));
        match end {
            SnapEnd::End => SnapId::end_of(a),
            _ => SnapId::start_of(a),
        }
    }

    fn walk(p: &Problem, seq: &[(&str, SnapEnd)]) -> SearchState {
        let mut s = SearchState::root(p);
        for &(name, end) in seq {
            let id = snap(p, name, end);
            assert!(s.is_applicable(p, id), "{name} {end:?} not applicable");
            s = advance(p, &s, id);
        }
        s
    }

    fn advance(p: &Problem, s: &SearchState, id: SnapId) -> SearchState {
        let config = StrategyConfig::baseline();
        let stats = Stats::default();
        let mut next = s.successor(p, id);
        let check = check_state_consistency(p, &next, &config, &stats).unwrap();
        if check.consistent {
            next.bounds = update_bounds(p, &next, &check, &config, &stats).unwrap();
        }
        next
    }

    const TAKE_OFF_FLY: [(&str, SnapEnd); 3] = [
        ("take-off l0", SnapEnd::Start),
        ("take-off l0", SnapEnd::End),
        ("fly l0", SnapEnd::Start),
    ];

    #[test]
    fn classification_follows_numeric_content() {
        let p = observer();
        let class = |n, e| classify_latest(p.snap(snap(&p, n, e)));
        assert_eq!(class("configure o0 e0", SnapEnd::Start), ActionClass::PropositionalTemporalOnly);
        assert_eq!(class("observe l0 o0", SnapEnd::Start), ActionClass::NumericConstraintsOnly);
        assert_eq!(class("fly l0", SnapEnd::Start), ActionClass::ContinuousRateChange);
        assert_eq!(class("take-off l0", SnapEnd::Start), ActionClass::InstantNumericEffect);
    }

    #[test]
    fn presets_round_trip_and_validate() {
        for name in StrategyConfig::PRESETS {
            let c = StrategyConfig::preset(name).unwrap();
            assert_eq!(c.name(), name);
            c.validate().unwrap();
        }
        let bad = StrategyConfig {
            sec31: false,
            sec32: true,
            ..StrategyConfig::baseline()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn propositional_latest_step_skips_the_lp() {
        let p = observer();
        let mut seq = TAKE_OFF_FLY.to_vec();
        seq.push(("configure o0 e0", SnapEnd::Start));
        let s = walk(&p, &seq);
        let stats = Stats::default();
        let config = StrategyConfig::preset("sec31").unwrap();
        let check = check_state_consistency(&p, &s, &config, &stats).unwrap();
        assert!(check.consistent);
        assert_eq!(check.decided_by, Decider::LatestSelection);
        assert_eq!(stats.snapshot().lp_feasibility_calls, 0);
        let bounds = update_bounds(&p, &s, &check, &config, &stats).unwrap();
        assert_eq!(bounds, s.parent_bounds);
    }

    #[test]
    fn observation_precondition_converts_to_elapsed_time() {
        let p = observer();
        let mut seq = TAKE_OFF_FLY.to_vec();
        seq.push(("configure o0 e0", SnapEnd::Start));
        seq.push(("configure o0 e0", SnapEnd::End));
        seq.push(("observe l0 o0", SnapEnd::Start));
        let s = walk(&p, &seq);
        let comp = Compilation::build(&p, &s, Layout::Reformulated, DEFAULT_EPSILON, false).unwrap();
        let Conversion::Converted(extra) = try_convert_to_temporal(&p, &comp) else {
            panic!("expected conversion");
        };
        // fly start is step 2 (node 3), observe start step 5 (node 6).
        assert!(extra.iter().any(|c| c.from == 3 && c.to == 6 && c.lb == 16.0 && c.ub.is_infinite()));
        let stats = Stats::default();
        let check = check_state_consistency(&p, &s, &StrategyConfig::optic_ii(), &stats).unwrap();
        assert!(check.consistent);
        assert_eq!(check.decided_by, Decider::Conversion);
        let times = schedule(&check, &stats).unwrap();
        assert!(times[5] - times[2] >= 16.0 - 1e-9);
    }

    #[test]
    fn bounds_after_fly_start_agree_between_closed_form_and_lp() {
        let p = observer();
        let s = walk(&p, &TAKE_OFF_FLY);
        let flown = p.var_by_name("flown l0").unwrap();
        let mut seen = Vec::new();
        for name in StrategyConfig::PRESETS {
            let config = StrategyConfig::preset(name).unwrap();
            let stats = Stats::default();
            let check = check_state_consistency(&p, &s, &config, &stats).unwrap();
            assert!(check.consistent);
            let b = update_bounds(&p, &s, &check, &config, &stats).unwrap();
            seen.push(b[flown.0]);
        }
        for (lo, hi) in seen {
            assert!((lo - DEFAULT_EPSILON).abs() < 1e-6, "{lo}");
            assert!((hi - 30.0).abs() < 1e-6, "{hi}");
        }
        let check = check_state_consistency(&p, &s, &StrategyConfig::optic_ii(), &Stats::default()).unwrap();
        let plan = plan_bound_updates(&p, &s, &check, &StrategyConfig::optic_ii());
        assert_eq!(plan[flown.0], Some(BoundStrategy::ClosedForm));
    }

    #[test]
    fn unreachable_observation_window_is_inconsistent_everywhere() {
        let text = generate(&InstanceSpec::flying_observer(2, 3, 2), 1).unwrap();
        let problem_text = text.problem.replace("(= (target-start o0) 16)", "(= (target-start o0) 31)");
        let p = parse_domain_and_problem(&text.domain, &problem_text).unwrap();
        let s = walk(
            &p,
            &[
                ("take-off l0", SnapEnd::Start),
                ("take-off l0", SnapEnd::End),
                ("fly l0", SnapEnd::Start),
                ("configure o0 e0", SnapEnd::Start),
                ("configure o0 e0", SnapEnd::End),
            ],
        );
        let id = snap(&p, "observe l0 o0", SnapEnd::Start);
        // Bounds on flown already rule it out; build the state anyway.
        let s = s.successor(&p, id);
        for name in StrategyConfig::PRESETS {
            let config = StrategyConfig::preset(name).unwrap();
            let check = check_state_consistency(&p, &s, &config, &Stats::default()).unwrap();
            assert!(!check.consistent, "{name}");
        }
    }

    #[test]
    fn layouts_differ_only_in_value_references() {
        let p = observer();
        let mut seq = TAKE_OFF_FLY.to_vec();
        seq.push(("configure o0 e0", SnapEnd::Start));
        seq.push(("configure o0 e0", SnapEnd::End));
        seq.push(("observe l0 o0", SnapEnd::Start));
        let s = walk(&p, &seq);
        let base = Compilation::build(&p, &s, Layout::Baseline, DEFAULT_EPSILON, false).unwrap();
        let reform = Compilation::build(&p, &s, Layout::Reformulated, DEFAULT_EPSILON, false).unwrap();
        assert_eq!(base.lp.rows.len(), reform.lp.rows.len());
        assert_eq!(base.lp.vars.len(), reform.lp.vars.len());
        for (a, b) in base.lp.rows.iter().zip(&reform.lp.rows) {
            assert_eq!(a.label, b.label);
            if a.label != "value" {
                assert_eq!(a, b);
            }
        }
    }
}
