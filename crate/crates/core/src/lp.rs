//! Continuous linear programs and a dense two-phase simplex solver.
//!
//! Programs are small (one row block per plan step), so the solver keeps a
//! dense tableau and uses Bland's rule, which cannot cycle. Variable bound
//! hints are part of the program: they are listed as bound rows by
//! [`LinearProgram::bound_rows`] and enforced by the solver.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::Comparator;

/// Feasibility / optimality tolerance.
pub const LP_TOLERANCE: f64 = 1e-7;
/// Margin used to close strict inequalities.
pub const STRICT_MARGIN: f64 = 1e-6;
/// Pivot cap per solve.
pub const ITERATION_CAP: usize = 50_000;

const PIVOT_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LpVar {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    pub terms: Vec<(f64, usize)>,
    pub cmp: Comparator,
    pub rhs: f64,
    /// Free-form provenance, e.g. `order`, `invariant`.
    pub label: &'static str,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    None,
    Minimize(usize),
    Maximize(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Feasible(Vec<f64>),
    Infeasible,
    OptimalValue(f64, Vec<f64>),
    Unbounded(Direction),
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
    #[error("invalid program: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub vars: Vec<LpVar>,
    pub rows: Vec<LpRow>,
    pub objective: Objective,
}

impl Default for LinearProgram {
    fn default() -> Self {
        Self::new()
    }
}

impl LinearProgram {
    pub fn new() -> Self {
        LinearProgram {
            vars: Vec::new(),
            rows: Vec::new(),
            objective: Objective::None,
        }
    }

    /// Adds a free variable.
    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.add_bounded_var(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_bounded_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.vars.push(LpVar {
            name: name.into(),
            lower,
            upper,
        });
        self.vars.len() - 1
    }

    pub fn add_row(&mut self, terms: Vec<(f64, usize)>, cmp: Comparator, rhs: f64, label: &'static str) {
        self.rows.push(LpRow {
            terms,
            cmp,
            rhs,
            label,
        });
    }

    /// Replaces a variable's hint interval.
    pub fn set_hint(&mut self, var: usize, lower: f64, upper: f64) {
        self.vars[var].lower = lower;
        self.vars[var].upper = upper;
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// The hint intervals written as ordinary rows.
    pub fn bound_rows(&self) -> Vec<LpRow> {
        let mut out = Vec::new();
        for (j, v) in self.vars.iter().enumerate() {
            if v.lower.is_finite() {
                out.push(LpRow {
                    terms: vec![(1.0, j)],
                    cmp: Comparator::Ge,
                    rhs: v.lower,
                    label: "bound",
                });
            }
            if v.upper.is_finite() {
                out.push(LpRow {
                    terms: vec![(1.0, j)],
                    cmp: Comparator::Le,
                    rhs: v.upper,
                    label: "bound",
                });
            }
        }
        out
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.vars.len();
        for r in &self.rows {
            if let Some(&(_, j)) = r.terms.iter().find(|&&(_, j)| j >= n) {
                return Err(LpError::Invalid(format!("row references undeclared variable {j}")));
            }
            if !r.rhs.is_finite() || r.terms.iter().any(|(w, _)| !w.is_finite()) {
                return Err(LpError::Invalid("non-finite coefficient".into()));
            }
        }
        for v in &self.vars {
            if v.lower > v.upper {
                return Err(LpError::Invalid(format!("empty hint interval on {}", v.name)));
            }
        }
        match self.objective {
            Objective::Minimize(j) | Objective::Maximize(j) if j >= n => {
                Err(LpError::Invalid("objective references undeclared variable".into()))
            }
            _ => Ok(()),
        }
    }

    /// Checks whether the constraints admit a point. The objective must be `None`.
    pub fn solve_feasibility(&self) -> Result<LpOutcome, LpError> {
        if self.objective != Objective::None {
            return Err(LpError::Invalid("feasibility check with an objective".into()));
        }
        self.validate()?;
        Simplex::build(self).run(self)
    }

    /// Optimizes the objective variable. The objective must be set.
    pub fn optimize(&self) -> Result<LpOutcome, LpError> {
        if self.objective == Objective::None {
            return Err(LpError::Invalid("optimize without an objective".into()));
        }
        self.validate()?;
        Simplex::build(self).run(self)
    }

    /// Convenience: solve a copy with the given objective.
    pub fn with_objective(&self, objective: Objective) -> LinearProgram {
        let mut lp = self.clone();
        lp.objective = objective;
        lp
    }

    /// Largest violation of any row or hint at `point`.
    pub fn max_violation(&self, point: &[f64]) -> f64 {
        self.rows
            .iter()
            .chain(self.bound_rows().iter())
            .map(|r| row_violation(r, point))
            .fold(0.0, f64::max)
    }

    /// CPLEX LP-format text.
    pub fn to_lp_format(&self) -> String {
        let name = |j: usize| sanitize(&self.vars[j].name);
        let mut s = String::new();
        match self.objective {
            Objective::None => s.push_str("Minimize\n obj: 0\n"),
            Objective::Minimize(j) => {
                let _ = writeln!(s, "Minimize\n obj: {}", name(j));
            }
            Objective::Maximize(j) => {
                let _ = writeln!(s, "Maximize\n obj: {}", name(j));
            }
        }
        s.push_str("Subject To\n");
        for (i, r) in self.rows.iter().enumerate() {
            let mut lhs = String::new();
            for (k, &(w, j)) in r.terms.iter().enumerate() {
                let sign = if w < 0.0 { "-" } else if k > 0 { "+" } else { "" };
                let _ = write!(lhs, "{}{} {} ", sign, w.abs(), name(j));
            }
            let (cmp, rhs) = match r.cmp {
                Comparator::Lt => ("<=", r.rhs - STRICT_MARGIN),
                Comparator::Le => ("<=", r.rhs),
                Comparator::Eq => ("=", r.rhs),
                Comparator::Ge => (">=", r.rhs),
                Comparator::Gt => (">=", r.rhs + STRICT_MARGIN),
            };
            let _ = writeln!(s, " {}_{}: {}{} {}", r.label, i, lhs, cmp, rhs);
        }
        s.push_str("Bounds\n");
        for (j, v) in self.vars.iter().enumerate() {
            let lo = if v.lower.is_finite() { v.lower.to_string() } else { "-inf".into() };
            let hi = if v.upper.is_finite() { v.upper.to_string() } else { "+inf".into() };
            let _ = writeln!(s, " {} <= {} <= {}", lo, name(j), hi);
        }
        s.push_str("End\n");
        s
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '\'' { c } else { '_' })
        .collect()
}

fn row_violation(r: &LpRow, point: &[f64]) -> f64 {
    let lhs: f64 = r.terms.iter().map(|&(w, j)| w * point[j]).sum();
    match r.cmp {
        Comparator::Le => (lhs - r.rhs).max(0.0),
        Comparator::Lt => (lhs - (r.rhs - STRICT_MARGIN)).max(0.0),
        Comparator::Ge => (r.rhs - lhs).max(0.0),
        Comparator::Gt => ((r.rhs + STRICT_MARGIN) - lhs).max(0.0),
        Comparator::Eq => (lhs - r.rhs).abs(),
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            writeln!(f, "{}", self.render_row(r))?;
        }
        Ok(())
    }
}

impl LinearProgram {
    /// Renders a row as `1 a - 2 b >= 3`.
    pub fn render_row(&self, r: &LpRow) -> String {
        let mut s = String::new();
        for (k, &(w, j)) in r.terms.iter().enumerate() {
            if k > 0 {
                s.push_str(if w < 0.0 { " - " } else { " + " });
            } else if w < 0.0 {
                s.push('-');
            }
            let _ = write!(s, "{} {}", w.abs(), self.vars[j].name);
        }
        let _ = write!(s, " {} {}", r.cmp, r.rhs);
        s
    }
}

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Clone, Copy, Debug)]
enum ColumnMap {
    /// `x = offset + y`
    Shifted { col: usize, offset: f64 },
    /// `x = offset - y`
    Mirrored { col: usize, offset: f64 },
    /// `x = y⁺ - y⁻`
    Split { pos: usize, neg: usize },
}

struct Simplex {
    /// `rows x (cols + 1)`; last column is the right-hand side.
    tableau: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    /// First artificial column; columns at or beyond are artificial.
    first_artificial: usize,
    map: Vec<ColumnMap>,
    pivots: usize,
}

impl Simplex {
    fn build(lp: &LinearProgram) -> Simplex {
        let mut map = Vec::with_capacity(lp.vars.len());
        let mut structural = 0usize;
        // extra rows: finite upper bounds on shifted columns, finite lower on mirrored
        let mut extra: Vec<(usize, f64)> = Vec::new();
        for v in &lp.vars {
            if v.lower.is_finite() {
                map.push(ColumnMap::Shifted {
                    col: structural,
                    offset: v.lower,
                });
                if v.upper.is_finite() {
                    extra.push((structural, v.upper - v.lower));
                }
                structural += 1;
            } else if v.upper.is_finite() {
                map.push(ColumnMap::Mirrored {
                    col: structural,
                    offset: v.upper,
                });
                structural += 1;
            } else {
                map.push(ColumnMap::Split {
                    pos: structural,
                    neg: structural + 1,
                });
                structural += 2;
            }
        }

        // rows as (coeffs over structural columns, sense, rhs)
        let mut rows: Vec<(Vec<f64>, Comparator, f64)> = Vec::new();
        for r in &lp.rows {
            let mut coeffs = vec![0.0; structural];
            let mut rhs = r.rhs;
            for &(w, j) in &r.terms {
                match map[j] {
                    ColumnMap::Shifted { col, offset } => {
                        coeffs[col] += w;
                        rhs -= w * offset;
                    }
                    ColumnMap::Mirrored { col, offset } => {
                        coeffs[col] -= w;
                        rhs -= w * offset;
                    }
                    ColumnMap::Split { pos, neg } => {
                        coeffs[pos] += w;
                        coeffs[neg] -= w;
                    }
                }
            }
            let (cmp, rhs) = match r.cmp {
                Comparator::Lt => (Comparator::Le, rhs - STRICT_MARGIN),
                Comparator::Gt => (Comparator::Ge, rhs + STRICT_MARGIN),
                c => (c, rhs),
            };
            rows.push((coeffs, cmp, rhs));
        }
        for (col, ub) in extra {
            let mut coeffs = vec![0.0; structural];
            coeffs[col] = 1.0;
            rows.push((coeffs, Comparator::Le, ub));
        }

        // normalize rhs >= 0
        for (coeffs, cmp, rhs) in rows.iter_mut() {
            if *rhs < 0.0 {
                coeffs.iter_mut().for_each(|c| *c = -*c);
                *rhs = -*rhs;
                *cmp = cmp.flipped();
            }
        }

        let m = rows.len();
        let slack_count = rows.iter().filter(|r| r.1 != Comparator::Eq).count();
        let art_count = rows.iter().filter(|r| r.1 != Comparator::Le).count();
        let first_slack = structural;
        let first_artificial = structural + slack_count;
        let cols = first_artificial + art_count;

        let mut tableau = vec![vec![0.0; cols + 1]; m];
        let mut basis = vec![0; m];
        let mut next_slack = first_slack;
        let mut next_art = first_artificial;
        for (i, (coeffs, cmp, rhs)) in rows.into_iter().enumerate() {
            tableau[i][..structural].copy_from_slice(&coeffs);
            tableau[i][cols] = rhs;
            match cmp {
                Comparator::Le => {
                    tableau[i][next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Comparator::Ge => {
                    tableau[i][next_slack] = -1.0;
                    next_slack += 1;
                    tableau[i][next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
                _ => {
                    tableau[i][next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }
        Simplex {
            tableau,
            basis,
            cols,
            first_artificial,
            map,
            pivots: 0,
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.cols + 1;
        let p = self.tableau[row][col];
        for k in 0..width {
            self.tableau[row][k] /= p;
        }
        let pivot_row = self.tableau[row].clone();
        for (i, r) in self.tableau.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for k in 0..width {
                    r[k] -= f * pivot_row[k];
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Minimizes `cost · x` over columns `< allowed`. Returns `Ok(false)` if unbounded.
    fn minimize(&mut self, cost: &[f64], allowed: usize) -> Result<bool, LpError> {
        loop {
            // reduced costs: c_j - c_B B^-1 A_j (tableau is already B^-1 A)
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j];
                for (i, &b) in self.basis.iter().enumerate() {
                    let cb = cost[b];
                    if cb != 0.0 {
                        rc -= cb * self.tableau[i][j];
                    }
                }
                if rc < -PIVOT_EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(true);
            };
            let rhs = self.cols;
            let mut leaving: Option<(usize, f64)> = None;
            for (i, r) in self.tableau.iter().enumerate() {
                let a = r[col];
                if a > PIVOT_EPS {
                    let ratio = r[rhs] / a;
                    leaving = match leaving {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - PIVOT_EPS
                                || ((ratio - lr).abs() <= PIVOT_EPS && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leaving else {
                return Ok(false);
            };
            self.pivots += 1;
            if self.pivots > ITERATION_CAP {
                return Err(LpError::IterationLimit(ITERATION_CAP));
            }
            self.pivot(row, col);
        }
    }

    fn objective_value(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &b)| cost[b] * self.tableau[i][self.cols])
            .sum()
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpOutcome, LpError> {
        // phase 1
        let mut phase1 = vec![0.0; self.cols];
        for c in phase1.iter_mut().skip(self.first_artificial) {
            *c = 1.0;
        }
        if self.first_artificial < self.cols {
            self.minimize(&phase1, self.cols)?;
            if self.objective_value(&phase1) > LP_TOLERANCE {
                return Ok(LpOutcome::Infeasible);
            }
            // drive remaining artificials out of the basis
            let mut i = 0;
            while i < self.basis.len() {
                if self.basis[i] >= self.first_artificial {
                    let col = (0..self.first_artificial)
                        .find(|&j| self.tableau[i][j].abs() > PIVOT_EPS && !self.basis.contains(&j));
                    match col {
                        Some(j) => {
                            self.pivot(i, j);
                            i += 1;
                        }
                        None => {
                            // redundant row
                            self.tableau.remove(i);
                            self.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }

        let (target, sign) = match lp.objective {
            Objective::None => return Ok(LpOutcome::Feasible(self.point())),
            Objective::Minimize(j) => (j, 1.0),
            Objective::Maximize(j) => (j, -1.0),
        };
        let mut cost = vec![0.0; self.cols];
        match self.map[target] {
            ColumnMap::Shifted { col, .. } => cost[col] = sign,
            ColumnMap::Mirrored { col, .. } => cost[col] = -sign,
            ColumnMap::Split { pos, neg } => {
                cost[pos] = sign;
                cost[neg] = -sign;
            }
        }
        if !self.minimize(&cost, self.first_artificial)? {
            return Ok(LpOutcome::Unbounded(if sign > 0.0 {
                Direction::Negative
            } else {
                Direction::Positive
            }));
        }
        let point = self.point();
        Ok(LpOutcome::OptimalValue(point[target], point))
    }

    fn point(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.cols];
        for (i, &b) in self.basis.iter().enumerate() {
            y[b] = self.tableau[i][self.cols];
        }
        self.map
            .iter()
            .map(|m| match *m {
                ColumnMap::Shifted { col, offset } => offset + y[col],
                ColumnMap::Mirrored { col, offset } => offset - y[col],
                ColumnMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }
}
