//! Exact oracles for the temporal network and the simplex: simple-cycle
//! enumeration and rational Fourier-Motzkin elimination.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnplan::lp::Objective;
use tnplan::{Comparator, LinearProgram, LpOutcome, Stn, StnVerdict};

// ---------------------------------------------------------------- STN

/// Minimum weight per ordered pair, `None` when there is no edge.
fn weight_matrix(n: usize, edges: &[(usize, usize, i64)]) -> Vec<Vec<Option<i64>>> {
    let mut w = vec![vec![None; n]; n];
    for &(u, v, c) in edges {
        let slot: &mut Option<i64> = &mut w[u][v];
        *slot = Some(slot.map_or(c, |old| old.min(c)));
    }
    w
}

/// True when some simple cycle has negative total weight. Cycles are
/// enumerated from their smallest node so each is seen once per direction.
fn has_negative_simple_cycle(w: &[Vec<Option<i64>>]) -> bool {
    fn dfs(w: &[Vec<Option<i64>>], start: usize, u: usize, cost: i64, seen: &mut Vec<bool>) -> bool {
        for v in 0..w.len() {
            let Some(c) = w[u][v] else { continue };
            if v == start && cost + c < 0 {
                return true;
            }
            if v > start && !seen[v] {
                seen[v] = true;
                if dfs(w, start, v, cost + c, seen) {
                    return true;
                }
                seen[v] = false;
            }
        }
        false
    }
    (0..w.len()).any(|s| {
        let mut seen = vec![false; w.len()];
        seen[s] = true;
        dfs(w, s, s, 0, &mut seen)
    })
}

fn random_stn(rng: &mut ChaCha8Rng) -> (Stn, usize) {
    let nodes = rng.gen_range(1..=7);
    let mut stn = Stn::new();
    for _ in 0..nodes {
        stn.add_node();
    }
    let n = nodes + 1;
    for _ in 0..rng.gen_range(0..=2 * n) {
        let from = rng.gen_range(0..n);
        let to = rng.gen_range(0..n);
        if from == to {
            continue;
        }
        let lb = rng.gen_range(-6..=8);
        let ub = if rng.gen_bool(0.4) { f64::INFINITY } else { (lb + rng.gen_range(0..=6)) as f64 };
        let lb = if rng.gen_bool(0.2) { f64::NEG_INFINITY } else { lb as f64 };
        stn.add_constraint(from, to, lb, ub).unwrap();
    }
    (stn, n)
}

/// Compares the network verdict, schedule and witness with the oracle.
pub fn check_stn(cases: u64, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inconsistent = 0;
    for case in 0..cases {
        let (stn, n) = random_stn(&mut rng);
        let edges: Vec<_> = stn.distance_edges().into_iter().map(|(u, v, c)| (u, v, c as i64)).collect();
        let w = weight_matrix(n, &edges);
        let expected_negative = has_negative_simple_cycle(&w);
        match stn.check_consistency() {
            StnVerdict::Consistent(times) => {
                ensure!(!expected_negative, "case {case}: missed a negative cycle");
                let t = |v: usize| if v == 0 { 0.0 } else { times[v - 1] };
                for c in stn.constraints() {
                    let d = t(c.to) - t(c.from);
                    ensure!(d >= c.lb - 1e-9 && d <= c.ub + 1e-9, "case {case}: schedule breaks {c:?}");
                }
                // earliest means every node sits at its longest forced delay
                let back = |v: usize| {
                    let mut probe = stn.clone();
                    probe.add_constraint(0, v, f64::NEG_INFINITY, t(v) - 0.5).unwrap();
                    probe.is_consistent()
                };
                for v in 1..n {
                    ensure!(!back(v) || t(v) < 0.5, "case {case}: node {v} could be earlier");
                }
            }
            StnVerdict::Inconsistent(cycle) => {
                inconsistent += 1;
                ensure!(expected_negative, "case {case}: phantom negative cycle");
                let total: i64 = (0..cycle.len())
                    .map(|i| w[cycle[i]][cycle[(i + 1) % cycle.len()]].expect("witness uses real edges"))
                    .sum();
                ensure!(total < 0, "case {case}: witness {cycle:?} weighs {total}");
            }
        }
    }
    ensure!(inconsistent * 10 > cases && inconsistent * 10 < 9 * cases, "unbalanced corpus: {inconsistent}");
    Ok(format!("{cases} networks, {inconsistent} with negative cycles"))
}

// ---------------------------------------------------------------- LP

type Q = BigRational;

fn q(x: i64) -> Q {
    Q::from_integer(BigInt::from(x))
}

/// `coeffs . x <= rhs`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Ineq {
    coeffs: Vec<Q>,
    rhs: Q,
}

impl Ineq {
    /// Scales so the first nonzero coefficient has magnitude one.
    fn normalized(mut self) -> Ineq {
        if let Some(lead) = self.coeffs.iter().find(|c| !c.is_zero()).cloned() {
            let s = lead.abs();
            for c in &mut self.coeffs {
                *c = &*c / &s;
            }
            self.rhs = &self.rhs / &s;
        }
        self
    }
}

/// Eliminates every variable except `keep`, cheapest pairing first. `None`
/// when the system grows past a size where the oracle is no longer cheap.
fn eliminate(mut sys: BTreeSet<Ineq>, vars: usize, keep: Option<usize>) -> Option<BTreeSet<Ineq>> {
    let mut left: Vec<usize> = (0..vars).filter(|&j| Some(j) != keep).collect();
    while !left.is_empty() {
        let cost = |j: usize| {
            let pos = sys.iter().filter(|r| r.coeffs[j].is_positive()).count();
            let neg = sys.iter().filter(|r| r.coeffs[j].is_negative()).count();
            pos * neg
        };
        let at = (0..left.len()).min_by_key(|&i| cost(left[i])).unwrap();
        let j = left.swap_remove(at);
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), BTreeSet::new());
        for r in sys {
            if r.coeffs[j].is_positive() {
                pos.push(r);
            } else if r.coeffs[j].is_negative() {
                neg.push(r);
            } else {
                rest.insert(r);
            }
        }
        for p in &pos {
            for m in &neg {
                let a = p.coeffs[j].clone();
                let b = -m.coeffs[j].clone();
                let coeffs = p.coeffs.iter().zip(&m.coeffs).map(|(x, y)| x * &b + y * &a).collect();
                let rhs = &p.rhs * &b + &m.rhs * &a;
                rest.insert(Ineq { coeffs, rhs }.normalized());
            }
        }
        if rest.len() > 2000 {
            return None;
        }
        sys = rest;
    }
    Some(sys)
}

fn constant_rows_hold(sys: &BTreeSet<Ineq>) -> bool {
    sys.iter()
        .filter(|r| r.coeffs.iter().all(Zero::is_zero))
        .all(|r| !r.rhs.is_negative())
}

struct Case {
    lp: LinearProgram,
    sys: BTreeSet<Ineq>,
    vars: usize,
}

fn random_lp(rng: &mut ChaCha8Rng) -> Case {
    let vars = rng.gen_range(1..=6);
    let mut lp = LinearProgram::new();
    let mut sys = BTreeSet::new();
    let unit = |j: usize, s: i64| (0..vars).map(|k| q(if k == j { s } else { 0 })).collect::<Vec<_>>();
    for j in 0..vars {
        let lower = if rng.gen_bool(0.8) { Some(rng.gen_range(-3..=2)) } else { None };
        let upper = if rng.gen_bool(0.6) { Some(rng.gen_range(3..=9)) } else { None };
        lp.add_bounded_var(
            format!("x{j}"),
            lower.map_or(f64::NEG_INFINITY, |l| l as f64),
            upper.map_or(f64::INFINITY, |u| u as f64),
        );
        if let Some(l) = lower {
            sys.insert(Ineq { coeffs: unit(j, -1), rhs: q(-l) });
        }
        if let Some(u) = upper {
            sys.insert(Ineq { coeffs: unit(j, 1), rhs: q(u) });
        }
    }
    for _ in 0..rng.gen_range(1..=5) {
        let coeffs: Vec<i64> = (0..vars).map(|_| if rng.gen_bool(0.6) { rng.gen_range(-3..=3) } else { 0 }).collect();
        let rhs = rng.gen_range(-8..=12);
        let cmp = [Comparator::Le, Comparator::Ge, Comparator::Eq][rng.gen_range(0..3)];
        let terms = coeffs.iter().enumerate().filter(|(_, &c)| c != 0).map(|(j, &c)| (c as f64, j)).collect();
        lp.add_row(terms, cmp, rhs as f64, "random");
        let le = Ineq { coeffs: coeffs.iter().map(|&c| q(c)).collect(), rhs: q(rhs) };
        let ge = Ineq { coeffs: coeffs.iter().map(|&c| q(-c)).collect(), rhs: q(-rhs) };
        match cmp {
            Comparator::Le => {
                sys.insert(le);
            }
            Comparator::Ge => {
                sys.insert(ge);
            }
            _ => {
                sys.insert(le);
                sys.insert(ge);
            }
        }
    }
    Case { lp, sys, vars }
}

fn to_f64(x: &Q) -> f64 {
    let n: f64 = x.numer().to_string().parse().unwrap();
    let d: f64 = x.denom().to_string().parse().unwrap();
    n / d
}

/// Exact range of `x_k` over the feasible set, infinite ends as `None`.
fn exact_range(sys: &BTreeSet<Ineq>, k: usize) -> (Option<Q>, Option<Q>) {
    let (mut lo, mut hi): (Option<Q>, Option<Q>) = (None, None);
    for r in sys {
        let a = &r.coeffs[k];
        if a.is_positive() {
            let b = &r.rhs / a;
            hi = Some(hi.map_or(b.clone(), |h: Q| h.min(b)));
        } else if a.is_negative() {
            let b = &r.rhs / a;
            lo = Some(lo.map_or(b.clone(), |l: Q| l.max(b)));
        }
    }
    (lo, hi)
}

/// Compares feasibility verdicts with Fourier-Motzkin elimination.
pub fn check_lp_feasibility(cases: u64, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut feasible, mut skipped) = (0, 0);
    for case in 0..cases {
        let c = random_lp(&mut rng);
        let Some(projected) = eliminate(c.sys.clone(), c.vars, None) else {
            skipped += 1;
            continue;
        };
        let expected = constant_rows_hold(&projected);
        match c.lp.solve_feasibility().map_err(|e| e.to_string())? {
            LpOutcome::Feasible(x) => {
                ensure!(expected, "case {case}: simplex found a point in an empty set\n{}", c.lp.to_lp_format());
                ensure!(c.lp.max_violation(&x) < 1e-6, "case {case}: point violates the program");
                feasible += 1;
            }
            LpOutcome::Infeasible => ensure!(!expected, "case {case}: simplex missed a feasible point\n{}", c.lp.to_lp_format()),
            other => return Err(format!("case {case}: unexpected {other:?}")),
        }
    }
    ensure!(skipped * 20 < cases, "oracle skipped {skipped} cases");
    ensure!(feasible * 10 > cases && feasible * 10 < 9 * cases, "unbalanced corpus: {feasible}");
    Ok(format!("{cases} programs, {feasible} feasible, {skipped} too large for the oracle"))
}

/// Compares optima of single columns with the exact projection.
pub fn check_lp_optimum(cases: u64, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for case in 0..cases {
        let c = random_lp(&mut rng);
        let k = rng.gen_range(0..c.vars);
        let Some(projected) = eliminate(c.sys.clone(), c.vars, Some(k)) else { continue };
        if !constant_rows_hold(&projected) {
            continue;
        }
        let (lo, hi) = exact_range(&projected, k);
        if let (Some(l), Some(h)) = (&lo, &hi) {
            if l > h {
                ensure!(c.lp.solve_feasibility().map_err(|e| e.to_string())? == LpOutcome::Infeasible, "case {case}");
                continue;
            }
        }
        for (objective, bound, sign) in [(Objective::Minimize(k), lo, -1.0), (Objective::Maximize(k), hi, 1.0)] {
            let outcome = c.lp.with_objective(objective).optimize().map_err(|e| e.to_string())?;
            match (outcome, bound) {
                (LpOutcome::OptimalValue(v, x), Some(b)) => {
                    let b = to_f64(&b);
                    ensure!((v - b).abs() < 1e-6, "case {case}: {objective:?} gave {v}, exact {b}");
                    ensure!(c.lp.max_violation(&x) < 1e-6, "case {case}: optimum violates the program");
                    checked += 1;
                }
                (LpOutcome::Unbounded(dir), None) => {
                    let expected = if sign > 0.0 { tnplan::lp::Direction::Positive } else { tnplan::lp::Direction::Negative };
                    ensure!(dir == expected, "case {case}");
                }
                (got, exact) => return Err(format!("case {case}: {objective:?} gave {got:?}, exact {exact:?}\n{}", c.lp.to_lp_format())),
            }
        }
    }
    ensure!(checked * 10 > 3 * cases, "only {checked} optima compared");
    Ok(format!("{checked} optima compared"))
}
