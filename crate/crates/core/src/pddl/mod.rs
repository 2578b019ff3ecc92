//! Reading the temporal-numeric PDDL subset and writing plans.

pub mod ast;
pub mod ground;
mod plan_io;
pub mod sexpr;
mod writer;

use std::fmt;

use serde::Serialize;

pub use plan_io::{read_plan, write_plan, PlanReadError};
pub use sexpr::Pos;
pub use writer::{write_domain, write_problem};

use crate::model::Problem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub line: usize,
    pub column: usize,
    pub message: String,
    /// `domain` or `problem`, when known.
    pub source: Option<&'static str>,
}

impl ParseDiagnostic {
    pub fn error(pos: Pos, message: impl Into<String>) -> Self {
        ParseDiagnostic {
            severity: Severity::Error,
            line: pos.line,
            column: pos.column,
            message: message.into(),
            source: None,
        }
    }

    pub fn warning(pos: Pos, message: impl Into<String>) -> Self {
        ParseDiagnostic {
            severity: Severity::Warning,
            ..ParseDiagnostic::error(pos, message)
        }
    }

    fn in_source(mut self, source: &'static str) -> Self {
        self.source.get_or_insert(source);
        self
    }

    pub fn is_unsupported(&self) -> bool {
        self.message.starts_with("unsupported feature")
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        if let Some(s) = self.source {
            write!(f, "{s}:")?;
        }
        if self.line > 0 {
            write!(f, "{}:{}: ", self.line, self.column)?;
        }
        write!(f, "{sev}: {}", self.message)
    }
}

impl std::error::Error for ParseDiagnostic {}

/// A parsed problem plus non-fatal diagnostics.
#[derive(Clone, Debug)]
pub struct Parsed {
    pub problem: Problem,
    pub warnings: Vec<ParseDiagnostic>,
}

/// Parses and grounds a domain and problem. Any error aborts.
pub fn parse_with_warnings(domain_text: &str, problem_text: &str) -> Result<Parsed, Vec<ParseDiagnostic>> {
    let one = |d: ParseDiagnostic| vec![d];
    let d = sexpr::read(domain_text)
        .and_then(|e| ast::parse_domain(&e))
        .map_err(|d| one(d.in_source("domain")))?;
    let p = sexpr::read(problem_text)
        .and_then(|e| ast::parse_problem(&e))
        .map_err(|d| one(d.in_source("problem")))?;
    let problem = ground::ground(&d, &p).map_err(one)?;
    let warnings = p.warnings.into_iter().map(|w| w.in_source("problem")).collect();
    Ok(Parsed { problem, warnings })
}

pub fn parse_domain_and_problem(domain_text: &str, problem_text: &str) -> Result<Problem, Vec<ParseDiagnostic>> {
    parse_with_warnings(domain_text, problem_text).map(|p| p.problem)
}
