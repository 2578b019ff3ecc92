use std::fs::File;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use serde::Serialize;

use tnplan::{
    generate, parse_domain_and_problem, validate, wa_star, InstanceSpec, Limit, SearchConfig, SearchOutcome, Stats,
    StrategyConfig,
};

use crate::commands::outcome_name;
use crate::BenchArgs;

/// Parses `3`, `1-5` or `1,3,7-9`.
pub fn parse_range(s: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let number = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad instance number `{t}`"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (number(a)?, number(b)?);
                if a > b {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(number(part)?),
        }
    }
    if out.is_empty() {
        return Err("no instances".into());
    }
    Ok(out)
}

#[derive(Serialize)]
struct Row<'a> {
    family: &'a str,
    instance: usize,
    config: &'a str,
    result: &'a str,
    /// `X` when the run hit the time budget.
    wall_seconds: String,
    states_expanded: u64,
    stn_only_decisions: u64,
    conversions: u64,
    lp_feasibility_calls: u64,
    lp_optimize_calls: u64,
    plan_steps: Option<usize>,
    valid: Option<bool>,
}

pub fn run(args: &BenchArgs) -> Result<()> {
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(File::create(path).with_context(|| format!("cannot write {}", path.display()))?),
        None => Box::new(io::stdout()),
    };
    let mut csv = csv::Writer::from_writer(sink);
    let instances = parse_range(&args.instances).map_err(anyhow::Error::msg)?;
    for index in instances {
        let spec = InstanceSpec::numbered(args.family, index, !args.no_cap)?;
        let text = generate(&spec, args.seed)?;
        let problem = parse_domain_and_problem(&text.domain, &text.problem)
            .map_err(|d| anyhow::anyhow!("generated instance does not parse: {}", d[0]))?;
        for name in &args.configs {
            let config = SearchConfig {
                strategy: StrategyConfig::preset(name).context("unknown preset")?,
                weight: args.weight,
                max_states: args.max_states,
                timeout: Some(Duration::from_secs_f64(args.timeout)),
                dedupe: false,
            };
            let stats = Stats::default();
            let started = Instant::now();
            let outcome = wa_star(&problem, &config, &stats)?;
            let elapsed = started.elapsed().as_secs_f64();
            let s = stats.snapshot();
            let (plan_steps, valid) = match &outcome {
                SearchOutcome::Plan(plan) => (Some(plan.len()), Some(validate(&problem, plan)?.is_valid())),
                _ => (None, None),
            };
            let wall_seconds = if outcome == SearchOutcome::ResourceLimit(Limit::Time) {
                "X".to_string()
            } else {
                format!("{elapsed:.3}")
            };
            csv.serialize(Row {
                family: args.family.name(),
                instance: index,
                config: name,
                result: outcome_name(&outcome),
                wall_seconds,
                states_expanded: s.states_expanded,
                stn_only_decisions: s.stn_only_decisions,
                conversions: s.conversions,
                lp_feasibility_calls: s.lp_feasibility_calls,
                lp_optimize_calls: s.lp_optimize_calls,
                plan_steps,
                valid,
            })?;
            csv.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_range("3").unwrap(), vec![3]);
        assert_eq!(parse_range("1-3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_range("1,4-5").unwrap(), vec![1, 4, 5]);
        assert!(parse_range("5-1").is_err());
        assert!(parse_range("x").is_err());
        assert!(parse_range("").is_err());
    }
}
