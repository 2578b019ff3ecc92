//! Random reachable states shared by the cross-configuration tests.
#![allow(dead_code)]

pub mod golden;
pub mod oracle;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnplan::{
    check_state_consistency, generate, parse_domain_and_problem, update_bounds, Family, InstanceSpec, Problem,
    SearchState, Stats, StrategyConfig,
};

pub fn small_spec(family: Family) -> InstanceSpec {
    match family {
        Family::FlyingObserver => InstanceSpec::flying_observer(3, 4, 2),
        Family::FlyingObserverConfigureInFlight => InstanceSpec::configure_in_flight(3, 4, 2),
        Family::FactoryQa => InstanceSpec::factory_qa(3, 4, 2, true),
        Family::FactoryQaCalibrateInFlight => InstanceSpec::factory_qa_in_flight(3, 4, 2, true),
        Family::LinearGenerator => InstanceSpec::linear_generator(3),
    }
}

pub fn instance(spec: &InstanceSpec, seed: u64) -> Problem {
    let inst = generate(spec, seed).unwrap();
    parse_domain_and_problem(&inst.domain, &inst.problem).unwrap()
}

pub struct Sample {
    pub family: Family,
    pub problem: usize,
    /// A successor as search generates it: parent bounds, not yet checked.
    pub state: SearchState,
}

pub struct Corpus {
    pub problems: Vec<Problem>,
    pub samples: Vec<Sample>,
}

/// `per_family` states per family, reached by random walks whose bounds are
/// maintained by the baseline configuration. Walks stop at the first
/// inconsistent successor, so both verdicts appear.
pub fn corpus(per_family: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (config, stats) = (StrategyConfig::baseline(), Stats::default());
    let mut problems = Vec::new();
    let mut samples = Vec::new();
    for family in Family::ALL {
        let mut taken = 0;
        let mut instance_seed = 0;
        while taken < per_family {
            instance_seed += 1;
            let p = instance(&small_spec(family), instance_seed);
            let index = problems.len();
            for _walk in 0..10 {
                let mut s = SearchState::root(&p);
                let depth = rng.gen_range(1..=16);
                for _ in 0..depth {
                    let Some(&id) = s.applicable(&p).choose(&mut rng) else { break };
                    let mut next = s.successor(&p, id);
                    samples.push(Sample { family, problem: index, state: next.clone() });
                    taken += 1;
                    let check = check_state_consistency(&p, &next, &config, &stats).unwrap();
                    if !check.consistent {
                        break;
                    }
                    next.bounds = update_bounds(&p, &next, &check, &config, &stats).unwrap();
                    s = next;
                    if taken == per_family {
                        break;
                    }
                }
                if taken == per_family {
                    break;
                }
            }
            problems.push(p);
        }
    }
    Corpus { problems, samples }
}
