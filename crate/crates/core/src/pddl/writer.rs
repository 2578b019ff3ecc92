//! Writes a ground [`Problem`] back out as PDDL.
//!
//! Every ground action becomes a parameterless schema whose name joins the
//! ground name with `__` (`fly l0` becomes `fly__l0`). Atoms and fluents keep
//! their structure, so parsing the output yields the same model up to action
//! names.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::model::{
    ActionKind, Comparator, ConditionSet, EffectMode, EffectSet, LinearCondition, LinearExpr, Problem,
    RateMode,
};

fn atom(name: &str) -> String {
    format!("({name})")
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn expr(p: &Problem, e: &LinearExpr) -> String {
    let mut parts: Vec<String> = e
        .terms
        .iter()
        .map(|&(w, v)| format!("(* {} {})", num(w), atom(&p.variables[v.0])))
        .collect();
    if parts.is_empty() || e.constant != 0.0 {
        parts.push(num(e.constant));
    }
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        format!("(+ {})", parts.join(" "))
    }
}

fn condition(p: &Problem, c: &LinearCondition) -> String {
    let cmp = match c.cmp {
        Comparator::Lt => "<",
        Comparator::Le => "<=",
        Comparator::Eq => "=",
        Comparator::Ge => ">=",
        Comparator::Gt => ">",
    };
    format!("({cmp} {} {})", expr(p, &c.lhs()), num(c.constant))
}

fn conditions(p: &Problem, cs: &ConditionSet, wrap: Option<&str>, out: &mut Vec<String>) {
    let items = cs
        .props
        .iter()
        .map(|q| atom(&p.propositions[q.0]))
        .chain(cs.numeric.iter().map(|c| condition(p, c)));
    for i in items {
        out.push(match wrap {
            Some(w) => format!("({w} {i})"),
            None => i,
        });
    }
}

fn effects(p: &Problem, es: &EffectSet, wrap: Option<&str>, out: &mut Vec<String>) {
    let mut items: Vec<String> = es.add.iter().map(|q| atom(&p.propositions[q.0])).collect();
    items.extend(es.del.iter().map(|q| format!("(not {})", atom(&p.propositions[q.0]))));
    for e in &es.numeric {
        let op = match e.mode {
            EffectMode::Assign => "assign",
            EffectMode::Increase => "increase",
            EffectMode::Decrease => "decrease",
        };
        items.push(format!("({op} {} {})", atom(&p.variables[e.target.0]), expr(p, &e.expr)));
    }
    for i in items {
        out.push(match wrap {
            Some(w) => format!("({w} {i})"),
            None => i,
        });
    }
}

fn and(items: &[String]) -> String {
    format!("(and {})", items.join(" "))
}

/// Collects `head -> arity` for names like `flying l0`.
fn signatures<'a>(names: impl Iterator<Item = &'a String>) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for n in names {
        let mut it = n.split_whitespace();
        if let Some(h) = it.next() {
            out.entry(h.to_string()).or_insert(it.count());
        }
    }
    out
}

fn params(n: usize) -> String {
    (0..n).map(|i| format!(" ?a{i}")).collect()
}

pub fn write_domain(p: &Problem) -> String {
    let mut s = String::new();
    s.push_str("(define (domain ground)\n");
    s.push_str("  (:requirements :durative-actions :fluents :duration-inequalities :continuous-effects)\n");
    s.push_str("  (:predicates");
    for (h, n) in signatures(p.propositions.iter()) {
        let _ = write!(s, " ({h}{})", params(n));
    }
    s.push_str(")\n  (:functions");
    for (h, n) in signatures(p.variables.iter()) {
        let _ = write!(s, " ({h}{})", params(n));
    }
    s.push_str(")\n");
    for a in &p.actions {
        let name = a.name.split_whitespace().collect::<Vec<_>>().join("__");
        if a.kind == ActionKind::Instantaneous {
            let mut pre = Vec::new();
            conditions(p, &a.pre_start, None, &mut pre);
            let mut eff = Vec::new();
            effects(p, &a.eff_start, None, &mut eff);
            let _ = write!(
                s,
                "  (:action {name}\n   :parameters ()\n   :precondition {}\n   :effect {})\n",
                and(&pre),
                and(&eff)
            );
            continue;
        }
        let mut dur: Vec<String> = a
            .duration
            .iter()
            .map(|d| format!("({} ?duration {})", d.cmp.symbol(), num(d.value)))
            .collect();
        if dur.is_empty() {
            dur.push("(>= ?duration 0)".into());
        }
        let mut cond = Vec::new();
        conditions(p, &a.pre_start, Some("at start"), &mut cond);
        conditions(p, &a.invariant, Some("over all"), &mut cond);
        conditions(p, &a.pre_end, Some("at end"), &mut cond);
        let mut eff = Vec::new();
        effects(p, &a.eff_start, Some("at start"), &mut eff);
        effects(p, &a.eff_end, Some("at end"), &mut eff);
        for c in &a.continuous {
            let op = match c.mode {
                RateMode::Decrease => "decrease",
                RateMode::Increase | RateMode::AssignRate => "increase",
            };
            eff.push(format!("({op} {} (* #t {}))", atom(&p.variables[c.target.0]), num(c.rate)));
        }
        let _ = write!(
            s,
            "  (:durative-action {name}\n   :parameters ()\n   :duration {}\n   :condition {}\n   :effect {})\n",
            and(&dur),
            and(&cond),
            and(&eff)
        );
    }
    s.push_str(")\n");
    s
}

pub fn write_problem(p: &Problem) -> String {
    let mut objects: Vec<&str> = p
        .propositions
        .iter()
        .chain(&p.variables)
        .flat_map(|n| n.split_whitespace().skip(1))
        .collect();
    objects.sort();
    objects.dedup();
    let mut s = String::new();
    s.push_str("(define (problem ground-problem) (:domain ground)\n");
    let _ = writeln!(s, "  (:objects {})", objects.join(" "));
    s.push_str("  (:init");
    for q in &p.initial.true_propositions {
        let _ = write!(s, "\n    {}", atom(&p.propositions[q.0]));
    }
    for (i, v) in p.initial.assignments.iter().enumerate() {
        let _ = write!(s, "\n    (= {} {})", atom(&p.variables[i]), num(*v));
    }
    s.push_str(")\n");
    let mut goal = Vec::new();
    goal.extend(p.goal.propositions.iter().map(|q| atom(&p.propositions[q.0])));
    goal.extend(p.goal.numeric_conditions.iter().map(|c| condition(p, c)));
    let _ = writeln!(s, "  (:goal {}))", and(&goal));
    s
}
