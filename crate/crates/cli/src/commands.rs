use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use tnplan::pddl::parse_with_warnings;
use tnplan::{
    check_goal, generate as generate_instance, read_plan, validate as simulate, wa_star, write_plan, InstanceSpec,
    Limit, Plan, Problem, SearchConfig, SearchOutcome, SearchState, SnapId, Stats, StatsSnapshot, StrategyConfig,
    ValidationError, Validity,
};

use crate::{GenerateArgs, PlanArgs, StrategyArgs, ValidateArgs};

pub const NO_PLAN: u8 = 1;
pub const BUDGET: u8 = 2;
pub const INPUT_ERROR: u8 = 3;

impl StrategyArgs {
    pub fn search_config(&self) -> Result<SearchConfig> {
        let any_flag = self.sec31 || self.sec32 || self.sec33;
        let name = self
            .preset
            .as_deref()
            .unwrap_or(if any_flag { "baseline" } else { "optic-ii" });
        let mut strategy = StrategyConfig::preset(name).context("unknown preset")?;
        strategy.sec31 |= self.sec31;
        strategy.sec32 |= self.sec32;
        strategy.sec33 |= self.sec33;
        strategy.epsilon = self.epsilon;
        strategy.validate()?;
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            bail!("weight must be positive");
        }
        let timeout = match self.timeout {
            Some(t) if !(t >= 0.0 && t.is_finite()) => bail!("timeout must be a nonnegative number of seconds"),
            t => t.map(Duration::from_secs_f64),
        };
        Ok(SearchConfig {
            strategy,
            weight: self.weight,
            max_states: self.max_states,
            timeout,
            dedupe: self.dedupe,
        })
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn load_problem(domain: &Path, problem: &Path) -> Result<Problem> {
    let (d, p) = (read(domain)?, read(problem)?);
    match parse_with_warnings(&d, &p) {
        Ok(parsed) => {
            for w in &parsed.warnings {
                eprintln!("{w}");
            }
            Ok(parsed.problem)
        }
        Err(diagnostics) => {
            for d in &diagnostics {
                eprintln!("{d}");
            }
            bail!("{} parse error(s)", diagnostics.len())
        }
    }
}

/// Stats JSON written by `plan --stats`.
#[derive(Serialize)]
struct Report<'a> {
    #[serde(flatten)]
    stats: StatsSnapshot,
    wall_seconds: f64,
    result: &'a str,
}

pub fn outcome_name(outcome: &SearchOutcome) -> &'static str {
    match outcome {
        SearchOutcome::Plan(_) => "plan",
        SearchOutcome::NoPlan => "no-plan",
        SearchOutcome::ResourceLimit(Limit::States) => "state-limit",
        SearchOutcome::ResourceLimit(Limit::Time) => "time-limit",
    }
}

pub fn plan(args: &PlanArgs) -> Result<ExitCode> {
    let config = args.strategy.search_config()?;
    let problem = load_problem(&args.domain, &args.problem)?;
    let stats = Stats::default();
    let started = Instant::now();
    let outcome = wa_star(&problem, &config, &stats)?;
    let wall_seconds = started.elapsed().as_secs_f64();

    if let Some(path) = &args.stats {
        let report = Report {
            stats: stats.snapshot(),
            wall_seconds,
            result: outcome_name(&outcome),
        };
        let json = serde_json::to_string_pretty(&report)?;
        fs::write(path, json + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    let plan = match outcome {
        SearchOutcome::Plan(plan) => plan,
        SearchOutcome::NoPlan => {
            eprintln!("no plan");
            return Ok(ExitCode::from(NO_PLAN));
        }
        SearchOutcome::ResourceLimit(limit) => {
            eprintln!("budget exceeded: {limit:?}");
            return Ok(ExitCode::from(BUDGET));
        }
    };
    let text = write_plan(&plan);
    match &args.out {
        Some(path) => fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    if let Some(path) = &args.dump_lp {
        let lp = final_program(&problem, &plan, &config)?;
        fs::write(path, lp).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Snap sequence of a plan: by time, ends before instants before starts.
fn replay(problem: &Problem, plan: &Plan) -> Result<SearchState> {
    let mut events = Vec::new();
    for (i, step) in plan.steps.iter().enumerate() {
        let a = problem
            .action_by_name(&step.action)
            .with_context(|| format!("unknown action `{}`", step.action))?;
        match step.duration {
            Some(d) => {
                events.push((step.time, 2, i, SnapId::start_of(a)));
                events.push((step.time + d, 0, i, SnapId::end_of(a)));
            }
            None => events.push((step.time, 1, i, SnapId::start_of(a))),
        }
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut state = SearchState::root(problem);
    for (.., snap) in events {
        state = state.successor(problem, snap);
    }
    Ok(state)
}

fn final_program(problem: &Problem, plan: &Plan, config: &SearchConfig) -> Result<String> {
    let state = replay(problem, plan)?;
    let check = check_goal(problem, &state, &config.strategy, &Stats::default())?;
    Ok(check.compilation.lp.to_lp_format())
}

pub fn validate(args: &ValidateArgs) -> Result<ExitCode> {
    let problem = load_problem(&args.domain, &args.problem)?;
    let plan = read_plan(&read(&args.plan)?)?;
    match simulate(&problem, &plan) {
        Ok(v @ Validity::Valid { .. }) => {
            println!("{v}");
            Ok(ExitCode::SUCCESS)
        }
        Ok(v) => {
            println!("{v}");
            Ok(ExitCode::from(NO_PLAN))
        }
        Err(e @ ValidationError::Malformed { .. }) => bail!("malformed plan: {e}"),
    }
}

pub fn spec_from(args: &GenerateArgs) -> Result<InstanceSpec> {
    let cap = !args.no_cap;
    if let Some(i) = args.index {
        return Ok(InstanceSpec::numbered(args.family, i, cap)?);
    }
    use tnplan::Family::*;
    let need = |v: Option<usize>, name: &str| v.with_context(|| format!("--{name} or --index is required"));
    Ok(match args.family {
        LinearGenerator => InstanceSpec::linear_generator(need(args.tanks, "tanks")?),
        family => {
            let (o, l, r) = (
                need(args.observations, "observations")?,
                need(args.legs, "legs")?,
                need(args.required, "required")?,
            );
            let base = match family {
                FactoryQa | FactoryQaCalibrateInFlight => InstanceSpec::factory_qa(o, l, r, cap),
                _ => InstanceSpec::flying_observer(o, l, r),
            };
            InstanceSpec { family, ..base }
        }
    })
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let instance = generate_instance(&spec_from(args)?, args.seed)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    for (name, text) in [("domain.pddl", &instance.domain), ("problem.pddl", &instance.problem)] {
        let path = args.out_dir.join(name);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(preset: Option<&str>, flags: [bool; 3]) -> StrategyArgs {
        StrategyArgs {
            preset: preset.map(String::from),
            sec31: flags[0],
            sec32: flags[1],
            sec33: flags[2],
            weight: 5.0,
            epsilon: 0.001,
            max_states: None,
            timeout: None,
            dedupe: false,
        }
    }

    #[test]
    fn flags_build_on_the_preset() {
        let name = |a: StrategyArgs| a.search_config().unwrap().strategy.name();
        assert_eq!(name(args(None, [false; 3])), "optic-ii");
        assert_eq!(name(args(None, [true, false, false])), "sec31");
        assert_eq!(name(args(Some("sec31"), [false, false, true])), "sec31-33");
        assert_eq!(name(args(Some("baseline"), [false; 3])), "baseline");
        assert!(args(None, [false, true, false]).search_config().is_err());
    }
}
