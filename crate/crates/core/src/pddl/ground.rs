//! Instantiates schemas over the declared objects.
//!
//! Predicates that no effect mentions are static: their atoms prune the
//! bindings and disappear from the ground model. Functions that no effect
//! targets are folded into constants the same way.

use std::collections::{HashMap, HashSet};

use super::ast::{Atom, Cond, Domain, Effect, Expr, NumOp, ProblemDef, Schema, Term, Timing};
use super::sexpr::Pos;
use super::ParseDiagnostic;
use crate::model::{
    ActionKind, ConditionSet, ContinuousEffect, DurationConstraint, DurativeAction, EffectMode,
    EffectSet, Goal, InitialState, InstantEffect, LinearCondition, LinearExpr, Problem, PropId,
    RateMode, VarId,
};

type GResult<T> = Result<T, ParseDiagnostic>;

/// Proposition standing for a goal that is false in every state.
pub const UNREACHABLE_GOAL: &str = "unsatisfiable-goal";

fn err<T>(pos: Pos, msg: impl Into<String>) -> GResult<T> {
    Err(ParseDiagnostic::error(pos, msg))
}

struct Types {
    parent: HashMap<String, String>,
}

impl Types {
    fn new(d: &Domain) -> GResult<Types> {
        let mut parent = HashMap::new();
        for (t, p) in &d.types {
            if t != "object" {
                parent.insert(t.clone(), p.clone());
            }
        }
        let types = Types { parent };
        for t in types.parent.keys() {
            types.ancestors(t)?;
        }
        Ok(types)
    }

    fn declared(&self, t: &str) -> bool {
        t == "object" || self.parent.contains_key(t)
    }

    fn ancestors(&self, t: &str) -> GResult<Vec<String>> {
        let mut out = vec![t.to_string()];
        let mut cur = t;
        while let Some(p) = self.parent.get(cur) {
            if out.iter().any(|x| x == p) {
                return err(Pos::default(), format!("cyclic type hierarchy at `{p}`"));
            }
            out.push(p.clone());
            cur = p;
        }
        Ok(out)
    }

    fn is_a(&self, t: &str, target: &str) -> bool {
        target == "object" || self.ancestors(t).is_ok_and(|a| a.iter().any(|x| x == target))
    }
}

fn ground_name(name: &str, args: &[String]) -> String {
    let mut s = name.to_string();
    for a in args {
        s.push(' ');
        s.push_str(a);
    }
    s
}

/// Why a binding produced no action.
enum Skip {
    Prune,
    Fail(ParseDiagnostic),
}

impl From<ParseDiagnostic> for Skip {
    fn from(d: ParseDiagnostic) -> Self {
        Skip::Fail(d)
    }
}

struct Grounder<'a> {
    fluent_preds: HashSet<&'a str>,
    fluent_funcs: HashSet<&'a str>,
    static_true: HashSet<String>,
    values: HashMap<String, f64>,
    props: Vec<String>,
    prop_index: HashMap<String, PropId>,
    vars: Vec<String>,
    var_index: HashMap<String, VarId>,
    initial_values: Vec<f64>,
    objects: HashSet<String>,
}

impl<'a> Grounder<'a> {
    fn prop(&mut self, name: String) -> PropId {
        if let Some(&p) = self.prop_index.get(&name) {
            return p;
        }
        let id = PropId(self.props.len());
        self.props.push(name.clone());
        self.prop_index.insert(name, id);
        id
    }

    /// The variable for a changing fluent, or `None` when it has no initial value.
    fn var(&mut self, name: String) -> Option<VarId> {
        if let Some(&v) = self.var_index.get(&name) {
            return Some(v);
        }
        let value = *self.values.get(&name)?;
        let id = VarId(self.vars.len());
        self.vars.push(name.clone());
        self.var_index.insert(name, id);
        self.initial_values.push(value);
        Some(id)
    }

    fn resolve(&self, a: &Atom, binding: &HashMap<&str, String>) -> GResult<Vec<String>> {
        a.args
            .iter()
            .map(|t| match t {
                Term::Var(v) => binding
                    .get(v.as_str())
                    .cloned()
                    .map_or_else(|| err(a.pos, format!("unbound variable `{v}`")), Ok),
                Term::Const(c) => {
                    if self.objects.contains(c) {
                        Ok(c.clone())
                    } else {
                        err(a.pos, format!("undeclared object `{c}`"))
                    }
                }
            })
            .collect()
    }

    fn linear(
        &mut self,
        e: &Expr,
        binding: &HashMap<&str, String>,
        duration: Option<f64>,
        pos: Pos,
    ) -> Result<LinearExpr, Skip> {
        Ok(match e {
            Expr::Num(v) => LinearExpr::constant(*v),
            Expr::Time => {
                return Err(Skip::Fail(ParseDiagnostic::error(
                    pos,
                    "unsupported feature: #t outside a continuous effect",
                )))
            }
            Expr::Duration => match duration {
                Some(d) => LinearExpr::constant(d),
                None => {
                    return Err(Skip::Fail(ParseDiagnostic::error(
                        pos,
                        "unsupported feature: ?duration of a variable-duration action used outside :duration",
                    )))
                }
            },
            Expr::Fluent(a) => {
                let name = ground_name(&a.name, &self.resolve(a, binding)?);
                if self.fluent_funcs.contains(a.name.as_str()) {
                    LinearExpr::var(self.var(name).ok_or(Skip::Prune)?)
                } else {
                    LinearExpr::constant(*self.values.get(&name).ok_or(Skip::Prune)?)
                }
            }
            Expr::Neg(a) => self.linear(a, binding, duration, pos)?.scaled(-1.0),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let x = self.linear(a, binding, duration, pos)?;
                let mut y = self.linear(b, binding, duration, pos)?;
                if matches!(e, Expr::Sub(..)) {
                    y = y.scaled(-1.0);
                }
                let mut terms = x.terms;
                terms.extend(y.terms);
                LinearExpr {
                    terms,
                    constant: x.constant + y.constant,
                }
                .normalized()
            }
            Expr::Mul(a, b) => {
                let x = self.linear(a, binding, duration, pos)?;
                let y = self.linear(b, binding, duration, pos)?;
                if x.is_constant() {
                    y.scaled(x.constant)
                } else if y.is_constant() {
                    x.scaled(y.constant)
                } else {
                    return Err(Skip::Fail(ParseDiagnostic::error(
                        pos,
                        "unsupported feature: product of two changing fluents",
                    )));
                }
            }
            Expr::Div(a, b) => {
                let x = self.linear(a, binding, duration, pos)?;
                let y = self.linear(b, binding, duration, pos)?;
                if !y.is_constant() {
                    return Err(Skip::Fail(ParseDiagnostic::error(
                        pos,
                        "unsupported feature: division by a changing fluent",
                    )));
                }
                if y.constant == 0.0 {
                    return Err(Skip::Prune);
                }
                x.scaled(1.0 / y.constant)
            }
        })
    }

    fn constant(
        &mut self,
        e: &Expr,
        binding: &HashMap<&str, String>,
        duration: Option<f64>,
        pos: Pos,
        what: &str,
    ) -> Result<f64, Skip> {
        let l = self.linear(e, binding, duration, pos)?;
        if !l.is_constant() {
            return Err(Skip::Fail(ParseDiagnostic::error(
                pos,
                format!("unsupported feature: {what} depends on a changing fluent"),
            )));
        }
        Ok(l.constant)
    }

    fn static_holds(&self, a: &Atom, binding: &HashMap<&str, String>) -> GResult<bool> {
        Ok(self
            .static_true
            .contains(&ground_name(&a.name, &self.resolve(a, binding)?)))
    }

    fn instantiate(&mut self, s: &Schema, args: &[String]) -> Result<DurativeAction, Skip> {
        let binding: HashMap<&str, String> = s
            .params
            .iter()
            .map(|(v, _)| v.as_str())
            .zip(args.iter().cloned())
            .collect();
        let mut duration = Vec::new();
        for (cmp, e) in &s.duration {
            let v = self.constant(e, &binding, None, s.pos, "duration")?;
            duration.push(DurationConstraint { cmp: *cmp, value: v });
        }
        let mut action = DurativeAction {
            name: ground_name(&s.name, args),
            kind: if s.durative {
                ActionKind::Durative
            } else {
                ActionKind::Instantaneous
            },
            duration,
            pre_start: ConditionSet::default(),
            pre_end: ConditionSet::default(),
            invariant: ConditionSet::default(),
            eff_start: EffectSet::default(),
            eff_end: EffectSet::default(),
            continuous: Vec::new(),
        };
        let (lo, hi) = action.duration_window();
        if s.durative && lo > hi {
            return Err(Skip::Prune);
        }
        let fixed = (s.durative && lo == hi).then_some(lo);

        for (t, c) in &s.conditions {
            let set = match t {
                Timing::Start => &mut action.pre_start,
                Timing::End => &mut action.pre_end,
                Timing::OverAll => &mut action.invariant,
            };
            match c {
                Cond::Atom(a) => {
                    if self.fluent_preds.contains(a.name.as_str()) {
                        let name = ground_name(&a.name, &self.resolve(a, &binding)?);
                        let p = self.prop(name);
                        set.props.push(p);
                    } else if !self.static_holds(a, &binding)? {
                        return Err(Skip::Prune);
                    }
                }
                Cond::Compare(cmp, l, r, pos) => {
                    let l = self.linear(l, &binding, fixed, *pos)?;
                    let r = self.linear(r, &binding, fixed, *pos)?;
                    match LinearCondition::from_sides(&l, *cmp, &r) {
                        Ok(c) => set.numeric.push(c),
                        Err(true) => {}
                        Err(false) => return Err(Skip::Prune),
                    }
                }
            }
        }

        for (t, e) in &s.effects {
            let set = match t {
                Timing::End => &mut action.eff_end,
                _ => &mut action.eff_start,
            };
            match e {
                Effect::Add(a) => {
                    let name = ground_name(&a.name, &self.resolve(a, &binding)?);
                    let p = self.prop(name);
                    set.add.push(p);
                }
                Effect::Del(a) => {
                    let name = ground_name(&a.name, &self.resolve(a, &binding)?);
                    let p = self.prop(name);
                    set.del.push(p);
                }
                Effect::Numeric(op, target, value) => {
                    let name = ground_name(&target.name, &self.resolve(target, &binding)?);
                    let target = self.var(name).ok_or(Skip::Prune)?;
                    let expr = self.linear(value, &binding, fixed, target_pos(e))?;
                    let mode = match op {
                        NumOp::Assign => EffectMode::Assign,
                        NumOp::Increase => EffectMode::Increase,
                        NumOp::Decrease => EffectMode::Decrease,
                    };
                    set.numeric.push(InstantEffect { target, mode, expr });
                }
                Effect::Continuous(op, target, rate) => {
                    let name = ground_name(&target.name, &self.resolve(target, &binding)?);
                    let target = self.var(name).ok_or(Skip::Prune)?;
                    let rate = self.constant(rate, &binding, fixed, target_pos(e), "continuous rate")?;
                    let mode = match op {
                        NumOp::Decrease => RateMode::Decrease,
                        _ => RateMode::Increase,
                    };
                    action.continuous.push(ContinuousEffect { target, mode, rate });
                }
            }
        }
        for set in [&mut action.eff_start, &mut action.eff_end] {
            // an atom both deleted and added ends up true
            let adds: HashSet<PropId> = set.add.iter().copied().collect();
            set.del.retain(|p| !adds.contains(p));
            dedup(&mut set.add);
            dedup(&mut set.del);
        }
        for set in [&mut action.pre_start, &mut action.pre_end, &mut action.invariant] {
            dedup(&mut set.props);
        }
        Ok(action)
    }
}

fn target_pos(e: &Effect) -> Pos {
    match e {
        Effect::Add(a) | Effect::Del(a) | Effect::Numeric(_, a, _) | Effect::Continuous(_, a, _) => a.pos,
    }
}

fn dedup(v: &mut Vec<PropId>) {
    let mut seen = HashSet::new();
    v.retain(|p| seen.insert(*p));
}

fn check_atom(a: &Atom, sigs: &HashMap<&str, usize>, what: &str, params: &HashSet<&str>) -> GResult<()> {
    match sigs.get(a.name.as_str()) {
        None => err(a.pos, format!("undeclared {what} `{}`", a.name)),
        Some(&n) if n != a.args.len() => err(
            a.pos,
            format!("{what} `{}` takes {n} arguments, got {}", a.name, a.args.len()),
        ),
        _ => {
            for t in &a.args {
                if let Term::Var(v) = t {
                    if !params.contains(v.as_str()) {
                        return err(a.pos, format!("undeclared variable `{v}`"));
                    }
                }
            }
            Ok(())
        }
    }
}

fn check_expr(e: &Expr, funcs: &HashMap<&str, usize>, params: &HashSet<&str>) -> GResult<()> {
    match e {
        Expr::Fluent(a) => check_atom(a, funcs, "function", params),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            check_expr(a, funcs, params)?;
            check_expr(b, funcs, params)
        }
        Expr::Neg(a) => check_expr(a, funcs, params),
        _ => Ok(()),
    }
}

fn check_schema(s: &Schema, preds: &HashMap<&str, usize>, funcs: &HashMap<&str, usize>, types: &Types) -> GResult<()> {
    let params: HashSet<&str> = s.params.iter().map(|(v, _)| v.as_str()).collect();
    for (v, t) in &s.params {
        if !v.starts_with('?') {
            return err(s.pos, format!("parameter `{v}` must start with `?`"));
        }
        if !types.declared(t) {
            return err(s.pos, format!("undeclared type `{t}`"));
        }
    }
    for (_, e) in &s.duration {
        check_expr(e, funcs, &params)?;
    }
    for (_, c) in &s.conditions {
        match c {
            Cond::Atom(a) => check_atom(a, preds, "predicate", &params)?,
            Cond::Compare(_, l, r, _) => {
                check_expr(l, funcs, &params)?;
                check_expr(r, funcs, &params)?;
            }
        }
    }
    for (_, e) in &s.effects {
        match e {
            Effect::Add(a) | Effect::Del(a) => check_atom(a, preds, "predicate", &params)?,
            Effect::Numeric(_, a, x) | Effect::Continuous(_, a, x) => {
                check_atom(a, funcs, "function", &params)?;
                check_expr(x, funcs, &params)?;
            }
        }
    }
    Ok(())
}

/// Grounds a parsed domain and problem into a [`Problem`].
pub fn ground(domain: &Domain, problem: &ProblemDef) -> GResult<Problem> {
    if !problem.domain.is_empty() && problem.domain != domain.name {
        return err(
            Pos::default(),
            format!("problem refers to domain `{}`, not `{}`", problem.domain, domain.name),
        );
    }
    let types = Types::new(domain)?;
    let mut object_types: Vec<(String, String)> = Vec::new();
    let mut seen: HashMap<String, String> = HashMap::new();
    for (o, t) in domain.constants.iter().chain(&problem.objects) {
        if !types.declared(t) {
            return err(Pos::default(), format!("object `{o}` has undeclared type `{t}`"));
        }
        match seen.get(o) {
            Some(prev) if prev != t => {
                return err(Pos::default(), format!("object `{o}` declared with two types"))
            }
            Some(_) => {}
            None => {
                seen.insert(o.clone(), t.clone());
                object_types.push((o.clone(), t.clone()));
            }
        }
    }

    let preds: HashMap<&str, usize> = domain
        .predicates
        .iter()
        .map(|(n, a)| (n.as_str(), a.len()))
        .collect();
    let funcs: HashMap<&str, usize> = domain
        .functions
        .iter()
        .map(|(n, a)| (n.as_str(), a.len()))
        .collect();
    let mut schema_names = HashSet::new();
    for s in &domain.schemas {
        if !schema_names.insert(s.name.as_str()) {
            return err(s.pos, format!("duplicate action `{}`", s.name));
        }
        check_schema(s, &preds, &funcs, &types)?;
    }

    let mut fluent_preds = HashSet::new();
    let mut fluent_funcs = HashSet::new();
    for s in &domain.schemas {
        for (_, e) in &s.effects {
            match e {
                Effect::Add(a) | Effect::Del(a) => {
                    fluent_preds.insert(a.name.as_str());
                }
                Effect::Numeric(_, a, _) | Effect::Continuous(_, a, _) => {
                    fluent_funcs.insert(a.name.as_str());
                }
            }
        }
    }

    let objects: HashSet<String> = object_types.iter().map(|(o, _)| o.clone()).collect();
    let no_params = HashSet::new();
    let check_ground = |a: &Atom, sigs: &HashMap<&str, usize>, what: &str| -> GResult<String> {
        check_atom(a, sigs, what, &no_params)?;
        let mut args = Vec::new();
        for t in &a.args {
            match t {
                Term::Const(c) if objects.contains(c) => args.push(c.clone()),
                Term::Const(c) => return err(a.pos, format!("undeclared object `{c}`")),
                Term::Var(v) => return err(a.pos, format!("variable `{v}` in a ground context")),
            }
        }
        Ok(ground_name(&a.name, &args))
    };

    let mut g = Grounder {
        fluent_preds,
        fluent_funcs,
        static_true: HashSet::new(),
        values: HashMap::new(),
        props: Vec::new(),
        prop_index: HashMap::new(),
        vars: Vec::new(),
        var_index: HashMap::new(),
        initial_values: Vec::new(),
        objects: objects.clone(),
    };
    let mut init_props = Vec::new();
    for a in &problem.init_atoms {
        let name = check_ground(a, &preds, "predicate")?;
        if g.fluent_preds.contains(a.name.as_str()) {
            init_props.push(g.prop(name));
        } else {
            g.static_true.insert(name);
        }
    }
    let mut changing = Vec::new();
    for (a, v) in &problem.init_values {
        let name = check_ground(a, &funcs, "function")?;
        if g.values.insert(name.clone(), *v).is_some() {
            return err(a.pos, format!("fluent `{name}` initialised twice"));
        }
        if g.fluent_funcs.contains(a.name.as_str()) {
            changing.push(name);
        }
    }
    for name in changing {
        g.var(name);
    }
    dedup(&mut init_props);

    let mut actions = Vec::new();
    for s in &domain.schemas {
        ground_schema(&mut g, s, &object_types, &types, &mut actions)?;
    }

    let mut goal = Goal::default();
    let empty = HashMap::new();
    for c in &problem.goal {
        match c {
            Cond::Atom(a) => {
                let name = check_ground(a, &preds, "predicate")?;
                if g.fluent_preds.contains(a.name.as_str()) {
                    goal.propositions.push(g.prop(name));
                } else if !g.static_true.contains(&name) {
                    goal.propositions.push(g.prop(UNREACHABLE_GOAL.to_string()));
                }
            }
            Cond::Compare(cmp, l, r, pos) => {
                check_expr(l, &funcs, &no_params)?;
                check_expr(r, &funcs, &no_params)?;
                let sides = g
                    .linear(l, &empty, None, *pos)
                    .and_then(|l| Ok((l, g.linear(r, &empty, None, *pos)?)));
                match sides {
                    Ok((l, r)) => match LinearCondition::from_sides(&l, *cmp, &r) {
                        Ok(c) => goal.numeric_conditions.push(c),
                        Err(true) => {}
                        Err(false) => goal.propositions.push(g.prop(UNREACHABLE_GOAL.to_string())),
                    },
                    Err(Skip::Prune) => {
                        return err(*pos, "goal refers to a fluent without an initial value")
                    }
                    Err(Skip::Fail(d)) => return Err(d),
                }
            }
        }
    }
    dedup(&mut goal.propositions);

    Problem::new(
        g.props,
        g.vars,
        actions,
        InitialState {
            true_propositions: init_props,
            assignments: g.initial_values,
        },
        goal,
    )
    .map_err(|e| ParseDiagnostic::error(Pos::default(), e.to_string()))
}

fn ground_schema(
    g: &mut Grounder<'_>,
    s: &Schema,
    objects: &[(String, String)],
    types: &Types,
    out: &mut Vec<DurativeAction>,
) -> GResult<()> {
    let candidates: Vec<Vec<String>> = s
        .params
        .iter()
        .map(|(_, t)| {
            objects
                .iter()
                .filter(|(_, ot)| types.is_a(ot, t))
                .map(|(o, _)| o.clone())
                .collect()
        })
        .collect();
    // static atoms checked as soon as their last parameter is bound
    let index: HashMap<&str, usize> = s
        .params
        .iter()
        .enumerate()
        .map(|(i, (v, _))| (v.as_str(), i))
        .collect();
    let mut checks: Vec<Vec<&Atom>> = vec![Vec::new(); s.params.len() + 1];
    for (_, c) in &s.conditions {
        if let Cond::Atom(a) = c {
            if !g.fluent_preds.contains(a.name.as_str()) {
                let depth = a
                    .args
                    .iter()
                    .filter_map(|t| match t {
                        Term::Var(v) => index.get(v.as_str()).map(|i| i + 1),
                        Term::Const(_) => None,
                    })
                    .max()
                    .unwrap_or(0);
                checks[depth].push(a);
            }
        }
    }

    let mut args = Vec::with_capacity(s.params.len());
    enumerate(g, s, &candidates, &checks, &mut args, out)
}

fn enumerate(
    g: &mut Grounder<'_>,
    s: &Schema,
    candidates: &[Vec<String>],
    checks: &[Vec<&Atom>],
    args: &mut Vec<String>,
    out: &mut Vec<DurativeAction>,
) -> GResult<()> {
    let depth = args.len();
    let binding: HashMap<&str, String> = s
        .params
        .iter()
        .map(|(v, _)| v.as_str())
        .zip(args.iter().cloned())
        .collect();
    for a in &checks[depth] {
        if !g.static_holds(a, &binding)? {
            return Ok(());
        }
    }
    if depth == s.params.len() {
        return match g.instantiate(s, args) {
            Ok(a) => {
                out.push(a);
                Ok(())
            }
            Err(Skip::Prune) => Ok(()),
            Err(Skip::Fail(d)) => Err(d),
        };
    }
    for o in &candidates[depth] {
        args.push(o.clone());
        enumerate(g, s, candidates, checks, args, out)?;
        args.pop();
    }
    Ok(())
}
