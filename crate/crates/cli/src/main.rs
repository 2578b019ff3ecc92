mod bench;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tnplan::StrategyConfig;

/// Temporal-numeric planner with state-informed solver selection.
#[derive(Parser, Debug)]
#[command(name = "tnplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for a plan.
    Plan(PlanArgs),
    /// Check a plan by simulation.
    Validate(ValidateArgs),
    /// Run configurations over generated instances and print CSV.
    Bench(BenchArgs),
    /// Write a generated domain and problem.
    Generate(GenerateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct StrategyArgs {
    /// Named configuration; defaults to optic-ii, or to baseline when any
    /// --secNN flag is given. Flags add to the preset.
    #[arg(long, value_parser = StrategyConfig::PRESETS)]
    pub preset: Option<String>,
    #[arg(long)]
    pub sec31: bool,
    #[arg(long)]
    pub sec32: bool,
    #[arg(long)]
    pub sec33: bool,
    /// Heuristic weight in f = g + W h.
    #[arg(long, default_value_t = tnplan::search::DEFAULT_WEIGHT)]
    pub weight: f64,
    /// Separation between ordered steps.
    #[arg(long, default_value_t = tnplan::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long)]
    pub max_states: Option<u64>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Drop states already generated with the same facts, open actions and bounds.
    #[arg(long)]
    pub dedupe: bool,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    pub domain: PathBuf,
    pub problem: PathBuf,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    /// Plan file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Counters and outcome as JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Linear program of the final state of the plan found.
    #[arg(long)]
    pub dump_lp: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    pub domain: PathBuf,
    pub problem: PathBuf,
    pub plan: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(value_parser = parse_family)]
    pub family: tnplan::Family,
    /// Instance numbers, e.g. `1-5` or `1,3,7`.
    #[arg(long, default_value = "1")]
    pub instances: String,
    /// Comma-separated presets.
    #[arg(long, value_delimiter = ',', value_parser = StrategyConfig::PRESETS,
          default_values_t = StrategyConfig::PRESETS.map(String::from))]
    pub configs: Vec<String>,
    /// Per-run budget in seconds; runs over it are marked X.
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    #[arg(long)]
    pub max_states: Option<u64>,
    #[arg(long, default_value_t = tnplan::search::DEFAULT_WEIGHT)]
    pub weight: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Leave the storage cap out of factory instances.
    #[arg(long)]
    pub no_cap: bool,
    /// CSV file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(value_parser = parse_family)]
    pub family: tnplan::Family,
    /// Numbered instance: standard size, or tank count for the linear generator.
    #[arg(long, conflicts_with_all = ["observations", "legs", "required", "tanks"])]
    pub index: Option<usize>,
    #[arg(long)]
    pub observations: Option<usize>,
    #[arg(long)]
    pub legs: Option<usize>,
    #[arg(long)]
    pub required: Option<usize>,
    #[arg(long)]
    pub tanks: Option<usize>,
    #[arg(long)]
    pub no_cap: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Directory receiving domain.pddl and problem.pddl.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn parse_family(s: &str) -> Result<tnplan::Family, String> {
    tnplan::Family::from_name(s).ok_or_else(|| {
        let names: Vec<_> = tnplan::Family::ALL.iter().map(|f| f.name()).collect();
        format!("unknown family `{s}`; expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    // clap's own usage exit code would read as "budget exceeded".
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(commands::INPUT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Plan(args) => commands::plan(&args),
        Command::Validate(args) => commands::validate(&args),
        Command::Bench(args) => bench::run(&args).map(|()| ExitCode::SUCCESS),
        Command::Generate(args) => commands::generate(&args).map(|()| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(commands::INPUT_ERROR)
    })
}
