//! Fixtures shared by the solver benchmarks.

use tnplan::lp::{LinearProgram, Objective};
use tnplan::{
    check_state_consistency, generate, parse_domain_and_problem, update_bounds, Comparator, InstanceSpec, Problem,
    SearchState, Stats, Stn, StrategyConfig,
};

/// `n` timepoints in a chain, each 1 to 10 after the previous, with a
/// deadline from the origin that keeps the network consistent.
pub fn chain_stn(n: usize) -> Stn {
    let mut stn = Stn::new();
    let mut prev = 0;
    for _ in 0..n {
        let next = stn.add_node();
        stn.add_constraint(prev, next, 1.0, 10.0).unwrap();
        prev = next;
    }
    stn.add_constraint(0, prev, 0.0, 5.0 * n as f64).unwrap();
    stn
}

/// Dense feasible program over `n` columns: every pair sums to at most
/// `i + j + 2`, every column is at least 1, objective maximises the last.
pub fn pairwise_lp(n: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let cols: Vec<usize> = (0..n).map(|i| lp.add_var(format!("x{i}"))).collect();
    for i in 0..n {
        lp.add_row(vec![(1.0, cols[i])], Comparator::Ge, 1.0, "floor");
        for j in i + 1..n {
            lp.add_row(vec![(1.0, cols[i]), (1.0, cols[j])], Comparator::Le, (i + j + 2) as f64, "pair");
        }
    }
    lp.with_objective(Objective::Maximize(cols[n - 1]))
}

pub fn observer(observations: usize, legs: usize, required: usize, seed: u64) -> Problem {
    let text = generate(&InstanceSpec::flying_observer(observations, legs, required), seed).unwrap();
    parse_domain_and_problem(&text.domain, &text.problem).unwrap()
}

/// A state `depth` snaps deep, always taking the first consistent successor,
/// left unchecked so the benchmark pays for the check.
pub fn walked_state(problem: &Problem, depth: usize) -> SearchState {
    let (config, stats) = (StrategyConfig::baseline(), Stats::default());
    let mut state = SearchState::root(problem);
    for _ in 0..depth {
        let next = state.applicable(problem).into_iter().find_map(|id| {
            let mut child = state.successor(problem, id);
            let check = check_state_consistency(problem, &child, &config, &stats).ok()?;
            if !check.consistent {
                return None;
            }
            child.bounds = update_bounds(problem, &child, &check, &config, &stats).ok()?;
            Some(child)
        });
        match next {
            Some(child) => state = child,
            None => break,
        }
    }
    state
}
