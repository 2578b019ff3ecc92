//! Temporal-numeric forward planning with simple temporal networks and
//! linear programs.

pub mod compile;
pub mod domains;
pub mod heuristic;
pub mod lp;
pub mod model;
pub mod pddl;
pub mod plan;
pub mod search;
pub mod state;
pub mod stn;
pub mod validator;

pub use lp::{LinearProgram, LpError, LpOutcome};
pub use model::*;
pub use stn::{Stn, StnError, StnVerdict, TemporalConstraint};
pub use pddl::{parse_domain_and_problem, read_plan, write_plan, ParseDiagnostic};
pub use plan::{Plan, PlanStep};
pub use compile::{
    check_goal, check_state_consistency, schedule, update_bounds, CompileError, Stats, StatsSnapshot,
    StrategyConfig, DEFAULT_EPSILON,
};
pub use domains::{generate, Family, Instance, InstanceSpec};
pub use search::{wa_star, Limit, SearchConfig, SearchError, SearchOutcome};
pub use state::SearchState;
pub use validator::{validate, ValidationError, Validity};
