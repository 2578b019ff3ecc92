//! Timestamped plans.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub time: f64,
    /// Ground action name, e.g. `fly l0`.
    pub action: String,
    /// `None` for instantaneous actions.
    pub duration: Option<f64>,
}

impl PlanStep {
    pub fn end_time(&self) -> f64 {
        self.time + self.duration.unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn new(mut steps: Vec<PlanStep>) -> Plan {
        steps.sort_by(|a, b| a.time.total_cmp(&b.time));
        Plan { steps }
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn makespan(&self) -> f64 {
        self.steps.iter().map(PlanStep::end_time).fold(0.0, f64::max)
    }
}
