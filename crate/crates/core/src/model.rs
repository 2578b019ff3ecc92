//! Ground planning-problem data model and the snap-action decomposition.
//!
//! A [`Problem`] is built once (normally by the PDDL front end) and is
//! immutable afterwards. Propositions, numeric variables and actions are
//! addressed by dense indices so the search can keep per-state data in flat
//! vectors.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used for `=` comparisons when evaluating conditions.
pub const EQ_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PropId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionId(pub usize);

/// Index of a snap-action in [`Problem::snaps`]. Durative action `a` owns
/// slots `2a` (start) and `2a + 1` (end); an instantaneous action only uses `2a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SnapId(pub usize);

impl SnapId {
    pub fn start_of(action: ActionId) -> SnapId {
        SnapId(action.0 * 2)
    }

    pub fn end_of(action: ActionId) -> SnapId {
        SnapId(action.0 * 2 + 1)
    }

    pub fn action(self) -> ActionId {
        ActionId(self.0 / 2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Comparator {
    /// Comparator obtained when both sides are multiplied by a negative number.
    pub fn flipped(self) -> Comparator {
        match self {
            Comparator::Lt => Comparator::Gt,
            Comparator::Le => Comparator::Ge,
            Comparator::Eq => Comparator::Eq,
            Comparator::Ge => Comparator::Le,
            Comparator::Gt => Comparator::Lt,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Eq => "=",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
        }
    }

    /// Evaluates `lhs cmp rhs`; equality uses [`EQ_TOLERANCE`], strict
    /// comparators are strict.
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Eq => (lhs - rhs).abs() <= EQ_TOLERANCE,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// `Σ wᵢ·vᵢ + c`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearExpr {
    pub terms: Vec<(f64, VarId)>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn constant(c: f64) -> Self {
        LinearExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarId) -> Self {
        LinearExpr {
            terms: vec![(1.0, v)],
            constant: 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().map(|&(_, v)| v)
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(w, v)| w * values[v.0])
            .sum::<f64>()
            + self.constant
    }

    /// Range of the expression over a box of per-variable intervals.
    pub fn range(&self, bounds: &[(f64, f64)]) -> (f64, f64) {
        let (lo, hi) = terms_range(&self.terms, bounds);
        (lo + self.constant, hi + self.constant)
    }

    pub fn scaled(&self, k: f64) -> LinearExpr {
        LinearExpr {
            terms: self.terms.iter().map(|&(w, v)| (w * k, v)).collect(),
            constant: self.constant * k,
        }
    }

    /// Merges duplicate variables and drops zero weights; terms end up sorted by variable.
    pub fn normalized(&self) -> LinearExpr {
        let mut acc: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(w, v) in &self.terms {
            *acc.entry(v).or_insert(0.0) += w;
        }
        LinearExpr {
            terms: acc
                .into_iter()
                .filter(|&(_, w)| w != 0.0)
                .map(|(v, w)| (w, v))
                .collect(),
            constant: self.constant,
        }
    }
}

/// `Σ wᵢ·vᵢ {cmp} c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearCondition {
    pub terms: Vec<(f64, VarId)>,
    pub cmp: Comparator,
    pub constant: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("variable {0:?} has no value")]
    MissingVariable(VarId),
}

impl LinearCondition {
    pub fn new(terms: Vec<(f64, VarId)>, cmp: Comparator, constant: f64) -> Self {
        LinearCondition {
            terms,
            cmp,
            constant,
        }
    }

    /// Builds `lhs cmp rhs` by moving everything to the left-hand side.
    /// Returns `Err(truth)` when the variables cancel and the comparison is a constant.
    pub fn from_sides(lhs: &LinearExpr, cmp: Comparator, rhs: &LinearExpr) -> Result<Self, bool> {
        let mut terms = lhs.terms.clone();
        terms.extend(rhs.terms.iter().map(|&(w, v)| (-w, v)));
        let merged = LinearExpr {
            terms,
            constant: 0.0,
        }
        .normalized();
        let constant = rhs.constant - lhs.constant;
        if merged.terms.is_empty() {
            return Err(cmp.holds(0.0, constant));
        }
        Ok(LinearCondition {
            terms: merged.terms,
            cmp,
            constant,
        })
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().map(|&(_, v)| v)
    }

    pub fn lhs(&self) -> LinearExpr {
        LinearExpr {
            terms: self.terms.clone(),
            constant: 0.0,
        }
    }

    /// The single variable this condition constrains, if it has exactly one term.
    pub fn single_var(&self) -> Option<(f64, VarId)> {
        match self.terms.as_slice() {
            [single] => Some(*single),
            _ => None,
        }
    }

    /// Evaluates against a dense value vector.
    pub fn holds(&self, values: &[f64]) -> bool {
        self.cmp.holds(self.lhs().eval(values), self.constant)
    }

    /// Evaluates against a sparse assignment.
    pub fn evaluate(&self, values: &BTreeMap<VarId, f64>) -> Result<bool, EvalError> {
        let mut lhs = 0.0;
        for &(w, v) in &self.terms {
            let value = values.get(&v).ok_or(EvalError::MissingVariable(v))?;
            lhs += w * value;
        }
        Ok(self.cmp.holds(lhs, self.constant))
    }

    /// Whether some point of the bound box satisfies the condition, up to `slack`.
    pub fn satisfiable_in(&self, bounds: &[(f64, f64)], slack: f64) -> bool {
        let (lo, hi) = terms_range(&self.terms, bounds);
        let c = self.constant;
        match self.cmp {
            Comparator::Lt => lo < c + slack,
            Comparator::Le => lo <= c + slack,
            Comparator::Eq => lo <= c + slack && hi >= c - slack,
            Comparator::Ge => hi >= c - slack,
            Comparator::Gt => hi > c - slack,
        }
    }
}

/// Interval of `sum(w * v)` when each variable ranges over its bounds.
fn terms_range(terms: &[(f64, VarId)], bounds: &[(f64, f64)]) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0, 0.0);
    for &(w, v) in terms {
        let (a, b) = bounds[v.0];
        if w >= 0.0 {
            lo += w * a;
            hi += w * b;
        } else {
            lo += w * b;
            hi += w * a;
        }
    }
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectMode {
    Increase,
    Assign,
    Decrease,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstantEffect {
    pub target: VarId,
    pub mode: EffectMode,
    pub expr: LinearExpr,
}

impl InstantEffect {
    /// New value of the target given the values before the snap fires.
    pub fn apply(&self, values: &[f64]) -> f64 {
        let x = self.expr.eval(values);
        match self.mode {
            EffectMode::Increase => values[self.target.0] + x,
            EffectMode::Decrease => values[self.target.0] - x,
            EffectMode::Assign => x,
        }
    }

    /// Post-effect expression in terms of the pre-effect values.
    pub fn as_expr(&self) -> LinearExpr {
        match self.mode {
            EffectMode::Assign => self.expr.clone(),
            EffectMode::Increase | EffectMode::Decrease => {
                let sign = if self.mode == EffectMode::Increase {
                    1.0
                } else {
                    -1.0
                };
                let mut e = self.expr.scaled(sign);
                e.terms.push((1.0, self.target));
                e.normalized()
            }
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        std::iter::once(self.target).chain(self.expr.vars())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateMode {
    Increase,
    AssignRate,
    Decrease,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousEffect {
    pub target: VarId,
    pub mode: RateMode,
    pub rate: f64,
}

impl ContinuousEffect {
    /// Contribution to `dv/dt` while the effect is active.
    pub fn signed_rate(&self) -> f64 {
        match self.mode {
            RateMode::Increase | RateMode::AssignRate => self.rate,
            RateMode::Decrease => -self.rate,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionSet {
    pub props: Vec<PropId>,
    pub numeric: Vec<LinearCondition>,
}

impl ConditionSet {
    pub fn is_empty(&self) -> bool {
        self.props.is_empty() && self.numeric.is_empty()
    }

    pub fn numeric_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.numeric.iter().flat_map(|c| c.vars())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EffectSet {
    pub add: Vec<PropId>,
    pub del: Vec<PropId>,
    pub numeric: Vec<InstantEffect>,
}

impl EffectSet {
    pub fn is_empty(&self) -> bool {
        self.add.is_empty() && self.del.is_empty() && self.numeric.is_empty()
    }
}

/// `?duration {cmp} value`, with the right-hand side already folded to a constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationConstraint {
    pub cmp: Comparator,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    Durative,
    Instantaneous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurativeAction {
    /// Ground name, e.g. `fly l0`.
    pub name: String,
    pub kind: ActionKind,
    pub duration: Vec<DurationConstraint>,
    pub pre_start: ConditionSet,
    pub pre_end: ConditionSet,
    pub invariant: ConditionSet,
    pub eff_start: EffectSet,
    pub eff_end: EffectSet,
    pub continuous: Vec<ContinuousEffect>,
}

impl DurativeAction {
    /// Tightest `[min, max]` window implied by the duration constraints.
    /// Strict bounds are treated as closed.
    pub fn duration_window(&self) -> (f64, f64) {
        let mut lo = 0.0_f64;
        let mut hi = f64::INFINITY;
        for d in &self.duration {
            match d.cmp {
                Comparator::Eq => {
                    lo = lo.max(d.value);
                    hi = hi.min(d.value);
                }
                Comparator::Le | Comparator::Lt => hi = hi.min(d.value),
                Comparator::Ge | Comparator::Gt => lo = lo.max(d.value),
            }
        }
        (lo, hi)
    }

    pub fn is_durative(&self) -> bool {
        self.kind == ActionKind::Durative
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SnapEnd {
    Start,
    End,
    Instantaneous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapAction {
    pub action: ActionId,
    pub end: SnapEnd,
    pub pre: ConditionSet,
    pub eff: EffectSet,
    /// Over-all obligations of the parent, attached to both halves.
    pub invariant: ConditionSet,
    pub started_rates: Vec<ContinuousEffect>,
    pub ended_rates: Vec<ContinuousEffect>,
}

impl SnapAction {
    pub fn changes_rates(&self) -> bool {
        !self.started_rates.is_empty() || !self.ended_rates.is_empty()
    }

    pub fn rate_targets(&self) -> impl Iterator<Item = VarId> + '_ {
        self.started_rates
            .iter()
            .chain(&self.ended_rates)
            .map(|e| e.target)
    }

    /// Variables whose value this snap changes, instantaneously or by rate.
    pub fn written_vars(&self) -> Vec<VarId> {
        let mut out: Vec<VarId> = self
            .eff
            .numeric
            .iter()
            .map(|e| e.target)
            .chain(self.rate_targets())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Variables this snap reads or writes through its own content
    /// (preconditions, effects, rate changes and own-action invariants).
    pub fn own_numeric_vars(&self) -> Vec<VarId> {
        let mut out: Vec<VarId> = self.pre.numeric_vars().collect();
        for e in &self.eff.numeric {
            out.extend(e.vars());
        }
        out.extend(self.rate_targets());
        if self.end != SnapEnd::Instantaneous {
            out.extend(self.invariant.numeric_vars());
        }
        out.sort();
        out.dedup();
        out
    }

    /// Proposition preconditions including the attached invariants.
    pub fn required_props(&self) -> impl Iterator<Item = PropId> + '_ {
        self.pre.props.iter().chain(&self.invariant.props).copied()
    }
}

/// Splits a durative action into its start and end snaps. For an
/// instantaneous action both returned values are the same
/// [`SnapEnd::Instantaneous`] snap.
pub fn split_durative(id: ActionId, action: &DurativeAction) -> (SnapAction, SnapAction) {
    if action.kind == ActionKind::Instantaneous {
        let snap = SnapAction {
            action: id,
            end: SnapEnd::Instantaneous,
            pre: action.pre_start.clone(),
            eff: action.eff_start.clone(),
            invariant: ConditionSet::default(),
            started_rates: Vec::new(),
            ended_rates: Vec::new(),
        };
        return (snap.clone(), snap);
    }
    let start = SnapAction {
        action: id,
        end: SnapEnd::Start,
        pre: action.pre_start.clone(),
        eff: action.eff_start.clone(),
        invariant: action.invariant.clone(),
        started_rates: action.continuous.clone(),
        ended_rates: Vec::new(),
    };
    let end = SnapAction {
        action: id,
        end: SnapEnd::End,
        pre: action.pre_end.clone(),
        eff: action.eff_end.clone(),
        invariant: action.invariant.clone(),
        started_rates: Vec::new(),
        ended_rates: action.continuous.clone(),
    };
    (start, end)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub true_propositions: Vec<PropId>,
    /// One value per problem variable, indexed by [`VarId`].
    pub assignments: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub propositions: Vec<PropId>,
    pub numeric_conditions: Vec<LinearCondition>,
}

impl Goal {
    pub fn is_empty(&self) -> bool {
        self.propositions.is_empty() && self.numeric_conditions.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate action name `{0}`")]
    DuplicateAction(String),
    #[error("{context}: unknown proposition index {index}")]
    UnknownProposition { context: String, index: usize },
    #[error("{context}: unknown variable index {index}")]
    UnknownVariable { context: String, index: usize },
    #[error("initial state assigns {got} values but the problem declares {expected} variables")]
    InitialArity { expected: usize, got: usize },
    #[error("action `{action}` adds and deletes `{prop}` in the same effect set")]
    AddDeleteOverlap { action: String, prop: String },
    #[error("action `{action}`: {message}")]
    Malformed { action: String, message: String },
    #[error("variable `{var}` mixes an assign-rate effect with other continuous effects")]
    MixedRateModes { var: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub propositions: Vec<String>,
    pub variables: Vec<String>,
    pub actions: Vec<DurativeAction>,
    pub initial: InitialState,
    pub goal: Goal,
    snaps: Vec<SnapAction>,
}

impl Problem {
    /// Validates the model invariants and precomputes the snap-actions.
    pub fn new(
        propositions: Vec<String>,
        variables: Vec<String>,
        actions: Vec<DurativeAction>,
        initial: InitialState,
        goal: Goal,
    ) -> Result<Problem, ModelError> {
        let np = propositions.len();
        let nv = variables.len();
        let check_prop = |p: &PropId, ctx: &str| {
            if p.0 >= np {
                Err(ModelError::UnknownProposition {
                    context: ctx.to_string(),
                    index: p.0,
                })
            } else {
                Ok(())
            }
        };
        let check_var = |v: VarId, ctx: &str| {
            if v.0 >= nv {
                Err(ModelError::UnknownVariable {
                    context: ctx.to_string(),
                    index: v.0,
                })
            } else {
                Ok(())
            }
        };
        let check_conds = |cs: &ConditionSet, ctx: &str| -> Result<(), ModelError> {
            cs.props.iter().try_for_each(|p| check_prop(p, ctx))?;
            for c in &cs.numeric {
                check_condition_shape(c, ctx)?;
                c.vars().try_for_each(|v| check_var(v, ctx))?;
            }
            Ok(())
        };
        let check_effs = |es: &EffectSet, ctx: &str| -> Result<(), ModelError> {
            es.add.iter().chain(&es.del).try_for_each(|p| check_prop(p, ctx))?;
            for e in &es.numeric {
                e.vars().try_for_each(|v| check_var(v, ctx))?;
            }
            let adds: HashSet<_> = es.add.iter().collect();
            if let Some(p) = es.del.iter().find(|p| adds.contains(p)) {
                return Err(ModelError::AddDeleteOverlap {
                    action: ctx.to_string(),
                    prop: propositions[p.0].clone(),
                });
            }
            Ok(())
        };

        let mut names = HashSet::new();
        for a in &actions {
            if !names.insert(a.name.as_str()) {
                return Err(ModelError::DuplicateAction(a.name.clone()));
            }
            let ctx = a.name.as_str();
            check_conds(&a.pre_start, ctx)?;
            check_conds(&a.pre_end, ctx)?;
            check_conds(&a.invariant, ctx)?;
            check_effs(&a.eff_start, ctx)?;
            check_effs(&a.eff_end, ctx)?;
            for c in &a.continuous {
                check_var(c.target, ctx)?;
                if !c.rate.is_finite() {
                    return Err(ModelError::Malformed {
                        action: a.name.clone(),
                        message: "continuous rate is not finite".into(),
                    });
                }
            }
            if a.kind == ActionKind::Instantaneous
                && (!a.continuous.is_empty()
                    || !a.invariant.is_empty()
                    || !a.eff_end.is_empty()
                    || !a.pre_end.is_empty()
                    || !a.duration.is_empty())
            {
                return Err(ModelError::Malformed {
                    action: a.name.clone(),
                    message: "instantaneous action carries durative parts".into(),
                });
            }
            if a.kind == ActionKind::Durative {
                let (lo, hi) = a.duration_window();
                if lo > hi || a.duration.iter().any(|d| !d.value.is_finite()) {
                    return Err(ModelError::Malformed {
                        action: a.name.clone(),
                        message: "duration constraints admit no duration".into(),
                    });
                }
            }
        }
        if initial.assignments.len() != nv {
            return Err(ModelError::InitialArity {
                expected: nv,
                got: initial.assignments.len(),
            });
        }
        initial
            .true_propositions
            .iter()
            .try_for_each(|p| check_prop(p, "initial state"))?;
        goal.propositions
            .iter()
            .try_for_each(|p| check_prop(p, "goal"))?;
        for c in &goal.numeric_conditions {
            check_condition_shape(c, "goal")?;
            c.vars().try_for_each(|v| check_var(v, "goal"))?;
        }

        // assign-rate is only meaningful when it is the sole rate source of a variable
        let mut modes: Vec<(bool, bool)> = vec![(false, false); nv];
        for a in &actions {
            for c in &a.continuous {
                let m = &mut modes[c.target.0];
                if c.mode == RateMode::AssignRate {
                    m.0 = true;
                } else {
                    m.1 = true;
                }
            }
        }
        if let Some(v) = modes.iter().position(|&(assign, other)| assign && other) {
            return Err(ModelError::MixedRateModes {
                var: variables[v].clone(),
            });
        }

        let snaps = actions
            .iter()
            .enumerate()
            .flat_map(|(i, a)| {
                let (s, e) = split_durative(ActionId(i), a);
                [s, e]
            })
            .collect();

        Ok(Problem {
            propositions,
            variables,
            actions,
            initial,
            goal,
            snaps,
        })
    }

    pub fn snap(&self, id: SnapId) -> &SnapAction {
        &self.snaps[id.0]
    }

    /// All snap slots; instantaneous actions contribute a duplicate in their
    /// unused end slot, see [`Problem::snap_ids`].
    pub fn snaps(&self) -> &[SnapAction] {
        &self.snaps
    }

    /// Snap ids that correspond to real snap-actions (the set `A_inst`).
    pub fn snap_ids(&self) -> impl Iterator<Item = SnapId> + '_ {
        self.actions.iter().enumerate().flat_map(|(i, a)| {
            let id = ActionId(i);
            let end = a.is_durative().then(|| SnapId::end_of(id));
            std::iter::once(SnapId::start_of(id)).chain(end)
        })
    }

    pub fn action(&self, id: ActionId) -> &DurativeAction {
        &self.actions[id.0]
    }

    pub fn action_by_name(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a.name == name).map(ActionId)
    }

    pub fn prop_by_name(&self, name: &str) -> Option<PropId> {
        self.propositions.iter().position(|p| p == name).map(PropId)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v == name).map(VarId)
    }

    pub fn num_props(&self) -> usize {
        self.propositions.len()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    /// Human-readable rendering of a condition, e.g. `1*(flown l0) <= 30`.
    pub fn describe_condition(&self, c: &LinearCondition) -> String {
        let lhs = c
            .terms
            .iter()
            .map(|&(w, v)| format!("{}*({})", w, self.variables[v.0]))
            .collect::<Vec<_>>()
            .join(" + ");
        format!("{} {} {}", lhs, c.cmp, c.constant)
    }
}

fn check_condition_shape(c: &LinearCondition, ctx: &str) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    if c.terms.is_empty() {
        return Err(ModelError::Malformed {
            action: ctx.to_string(),
            message: "numeric condition without variables".into(),
        });
    }
    for &(_, v) in &c.terms {
        if !seen.insert(v) {
            return Err(ModelError::Malformed {
                action: ctx.to_string(),
                message: "numeric condition repeats a variable".into(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cond(terms: &[(f64, usize)], cmp: Comparator, c: f64) -> LinearCondition {
        LinearCondition::new(terms.iter().map(|&(w, v)| (w, VarId(v))).collect(), cmp, c)
    }

    #[test]
    fn evaluate_condition_examples() {
        let flown = VarId(0);
        let mut vals = BTreeMap::new();
        vals.insert(flown, 10.0);
        assert_eq!(cond(&[(1.0, 0)], Comparator::Ge, 10.0).evaluate(&vals), Ok(true));
        vals.insert(flown, 9.5);
        assert_eq!(cond(&[(1.0, 0)], Comparator::Ge, 10.0).evaluate(&vals), Ok(false));

        let mut vals = BTreeMap::new();
        vals.insert(VarId(0), 1.0);
        vals.insert(VarId(1), 0.0);
        // 2a - b <= 3 with a=1, b=0: 2 <= 3
        assert_eq!(
            cond(&[(2.0, 0), (-1.0, 1)], Comparator::Le, 3.0).evaluate(&vals),
            Ok(true)
        );
    }

    #[test]
    fn evaluate_condition_missing_variable() {
        let vals = BTreeMap::new();
        assert_eq!(
            cond(&[(1.0, 3)], Comparator::Le, 1.0).evaluate(&vals),
            Err(EvalError::MissingVariable(VarId(3)))
        );
    }

    #[test]
    fn equality_tolerance_and_strictness() {
        assert!(Comparator::Eq.holds(1.0 + 5e-10, 1.0));
        assert!(!Comparator::Eq.holds(1.0 + 5e-9, 1.0));
        assert!(!Comparator::Lt.holds(1.0, 1.0));
        assert!(Comparator::Le.holds(1.0, 1.0));
    }

    fn durative(name: &str) -> DurativeAction {
        DurativeAction {
            name: name.into(),
            kind: ActionKind::Durative,
            duration: vec![DurationConstraint {
                cmp: Comparator::Eq,
                value: 3.0,
            }],
            pre_start: ConditionSet::default(),
            pre_end: ConditionSet::default(),
            invariant: ConditionSet::default(),
            eff_start: EffectSet::default(),
            eff_end: EffectSet::default(),
            continuous: vec![],
        }
    }

    #[test]
    fn split_without_rates() {
        let (s, e) = split_durative(ActionId(0), &durative("wait"));
        assert!(s.started_rates.is_empty() && s.ended_rates.is_empty());
        assert!(e.started_rates.is_empty() && e.ended_rates.is_empty());
        assert_eq!(s.end, SnapEnd::Start);
        assert_eq!(e.end, SnapEnd::End);
    }

    #[test]
    fn split_is_lossless() {
        let mut a = durative("fly l0");
        a.pre_start.props = vec![PropId(0)];
        a.invariant.numeric = vec![cond(&[(1.0, 0)], Comparator::Le, 30.0)];
        a.eff_end.add = vec![PropId(1)];
        a.eff_end.del = vec![PropId(0)];
        a.continuous = vec![ContinuousEffect {
            target: VarId(0),
            mode: RateMode::Increase,
            rate: 1.0,
        }];
        let (s, e) = split_durative(ActionId(7), &a);
        assert_eq!(s.pre, a.pre_start);
        assert_eq!(s.eff, a.eff_start);
        assert_eq!(e.pre, a.pre_end);
        assert_eq!(e.eff, a.eff_end);
        assert_eq!(s.started_rates, a.continuous);
        assert_eq!(e.ended_rates, a.continuous);
        assert_eq!(s.invariant, a.invariant);
        assert_eq!(e.invariant, a.invariant);
        assert!(s.ended_rates.is_empty() && e.started_rates.is_empty());
    }

    #[test]
    fn problem_rejects_duplicate_names_and_overlap() {
        let err = Problem::new(
            vec![],
            vec![],
            vec![durative("a"), durative("a")],
            InitialState::default(),
            Goal::default(),
        )
        .unwrap_err();
        assert_eq!(err, ModelError::DuplicateAction("a".into()));

        let mut bad = durative("b");
        bad.eff_start.add = vec![PropId(0)];
        bad.eff_start.del = vec![PropId(0)];
        let err = Problem::new(
            vec!["p".into()],
            vec![],
            vec![bad],
            InitialState::default(),
            Goal::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::AddDeleteOverlap { .. }));
    }

    #[test]
    fn snap_ids_cover_every_action() {
        let mut inst = durative("tick");
        inst.kind = ActionKind::Instantaneous;
        inst.duration.clear();
        let p = Problem::new(
            vec![],
            vec![],
            vec![durative("a"), inst],
            InitialState::default(),
            Goal::default(),
        )
        .unwrap();
        let ids: Vec<_> = p.snap_ids().collect();
        assert_eq!(ids, vec![SnapId(0), SnapId(1), SnapId(2)]);
        assert_eq!(p.snap(SnapId(2)).end, SnapEnd::Instantaneous);
    }

    #[test]
    fn from_sides_moves_terms_left() {
        let l = LinearExpr::var(VarId(0));
        let r = LinearExpr {
            terms: vec![(2.0, VarId(1))],
            constant: 4.0,
        };
        let c = LinearCondition::from_sides(&l, Comparator::Le, &r).unwrap();
        assert_eq!(c.terms, vec![(1.0, VarId(0)), (-2.0, VarId(1))]);
        assert_eq!(c.constant, 4.0);
        assert_eq!(
            LinearCondition::from_sides(&LinearExpr::constant(1.0), Comparator::Le, &LinearExpr::constant(2.0)),
            Err(true)
        );
    }
}
