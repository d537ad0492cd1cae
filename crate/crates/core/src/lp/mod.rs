//! Sparse linear-program model and a self-contained revised simplex solver
//! returning primal and dual optima with feasibility and complementary
//! slackness residuals.
//!
//! The solver is deterministic: Dantzig pricing with lowest-index
//! tie-breaking, falling back to Bland's rule on degenerate stretches, so
//! identical models produce identical solutions.

mod dual;
mod simplex;

pub use dual::solve_via_dual;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default absolute tolerance on solver residuals.
pub const TOL_LP: f64 = 1e-9;
/// Default tolerance for complementary-slackness products.
pub const TOL_CS: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("infeasible")]
    Infeasible,
    #[error("unbounded")]
    Unbounded,
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("model malformed: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program over variables with default bounds `[0, +inf)`;
/// free variables are supported, as are shifted finite bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpModel {
    pub sense: Sense,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

impl LpModel {
    pub fn new(sense: Sense) -> Self {
        LpModel {
            sense,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Add a variable with bounds `[0, +inf)`; returns its index.
    pub fn add_var(&mut self, obj: f64) -> usize {
        self.add_var_bounded(obj, 0.0, f64::INFINITY)
    }

    /// Add a free variable; returns its index.
    pub fn add_free_var(&mut self, obj: f64) -> usize {
        self.add_var_bounded(obj, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_var_bounded(&mut self, obj: f64, lower: f64, upper: f64) -> usize {
        assert!(obj.is_finite(), "objective coefficient must be finite");
        assert!(lower <= upper, "lower bound above upper bound");
        self.objective.push(obj);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, relation: Relation, rhs: f64, coeffs: Vec<(usize, f64)>) {
        debug_assert!(rhs.is_finite());
        debug_assert!(coeffs.iter().all(|&(j, v)| j < self.num_vars() && v.is_finite()));
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Row activity `a_i . x`.
    pub fn row_activity(&self, row: usize, x: &[f64]) -> f64 {
        self.rows[row]
            .coeffs
            .iter()
            .map(|&(j, v)| v * x[j])
            .sum()
    }

    /// Debug dump in CPLEX-LP text format.
    pub fn to_cplex_lp(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let head = match self.sense {
            Sense::Minimize => "Minimize",
            Sense::Maximize => "Maximize",
        };
        let term = |j: usize, v: f64| format!("{} {} x{}", if v < 0.0 { "-" } else { "+" }, v.abs(), j);
        writeln!(s, "{head}\n obj:").unwrap();
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write!(s, " {}", term(j, c)).unwrap();
            }
        }
        writeln!(s, "\nSubject To").unwrap();
        for (i, row) in self.rows.iter().enumerate() {
            write!(s, " c{i}:").unwrap();
            for &(j, v) in &row.coeffs {
                write!(s, " {}", term(j, v)).unwrap();
            }
            let rel = match row.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            writeln!(s, " {} {}", rel, row.rhs).unwrap();
        }
        writeln!(s, "Bounds").unwrap();
        for j in 0..self.num_vars() {
            if self.lower[j] == f64::NEG_INFINITY && self.upper[j] == f64::INFINITY {
                writeln!(s, " x{j} free").unwrap();
            } else if self.lower[j] != 0.0 || self.upper[j] != f64::INFINITY {
                writeln!(s, " {} <= x{j} <= {}", self.lower[j], self.upper[j]).unwrap();
            }
        }
        writeln!(s, "End").unwrap();
        s
    }
}

/// Solver status recorded in a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// An optimal vertex solution with row duals and audit residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// One dual value per constraint row, in the model's own sense
    /// convention (for Maximize, binding `<=` rows have non-negative duals).
    pub dual: Vec<f64>,
    /// Reduced costs `c_j - y . a_j` per variable.
    pub reduced_costs: Vec<f64>,
    pub max_primal_residual: f64,
    pub max_dual_residual: f64,
    pub max_cs_residual: f64,
}

/// Residual report from [`check_complementary_slackness`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlacknessReport {
    /// `|dual_i| * |slack_i|` per row.
    pub row_products: Vec<f64>,
    /// `|x_j - bound| * |reduced_cost_j|` per variable.
    pub var_products: Vec<f64>,
    pub max_product: f64,
    pub max_primal_residual: f64,
    pub max_dual_residual: f64,
}

impl SlacknessReport {
    pub fn within(&self, tol_cs: f64) -> bool {
        self.max_product <= tol_cs
    }
}

/// Solve to optimality with Bland-stabilized revised simplex.
///
/// `tol` is the absolute residual tolerance; [`TOL_LP`] is the conventional
/// choice. Errors are `Infeasible`, `Unbounded`, or `NumericFailure` when
/// residual checks still fail after bounded refactorization restarts.
pub fn lp_solve(model: &LpModel, tol: f64) -> Result<LpSolution, LpError> {
    simplex::solve(model, tol)
}

/// Solve choosing orientation automatically: models with many more rows than
/// variables are solved through their explicit dual (the optimal basis is
/// square in the row dimension, so the tall orientation is the slow one),
/// and the solution is mapped back and audited against the original model.
pub fn lp_solve_auto(model: &LpModel, tol: f64) -> Result<LpSolution, LpError> {
    if 2 * model.num_rows() > 3 * model.num_vars() && dual::dualizable(model) {
        match solve_via_dual(model, tol) {
            Ok(sol) => return Ok(sol),
            Err(LpError::NumericFailure(_)) => {} // fall through to direct solve
            Err(e) => return Err(e),
        }
    }
    lp_solve(model, tol)
}

/// Audit a solution against its model: recomputes every slack-times-dual and
/// variable-times-reduced-cost product plus primal/dual feasibility
/// residuals, independent of solver internals.
pub fn check_complementary_slackness(
    model: &LpModel,
    solution: &LpSolution,
    _tol_cs: f64,
) -> SlacknessReport {
    audit(model, &solution.primal, &solution.dual)
}

/// Compute the full residual report for a (primal, dual) pair.
pub(crate) fn audit(model: &LpModel, x: &[f64], y: &[f64]) -> SlacknessReport {
    let n = model.num_vars();
    let m = model.num_rows();
    let sign = match model.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut row_products = vec![0.0; m];
    let mut max_primal = 0.0f64;
    for (i, row) in model.rows().iter().enumerate() {
        let act = model.row_activity(i, x);
        let slack = row.rhs - act;
        let violation = match row.relation {
            Relation::Le => (-slack).max(0.0),
            Relation::Ge => slack.max(0.0),
            Relation::Eq => slack.abs(),
        };
        max_primal = max_primal.max(violation);
        row_products[i] = (y[i] * slack).abs();
    }
    // Reduced costs in the user sense; dual feasibility measured on the
    // minimize-equivalent problem.
    let mut reduced = vec![0.0; n];
    for (j, rc) in reduced.iter_mut().enumerate() {
        *rc = model.objective()[j];
    }
    for (i, row) in model.rows().iter().enumerate() {
        for &(j, v) in &row.coeffs {
            reduced[j] -= y[i] * v;
        }
    }
    let mut max_dual = 0.0f64;
    let mut var_products = vec![0.0; n];
    for j in 0..n {
        let lo = model.lower()[j];
        let hi = model.upper()[j];
        let rc_min = sign * reduced[j];
        let at_lower = lo.is_finite() && x[j] - lo <= 1e-7 * (1.0 + x[j].abs());
        let at_upper = hi.is_finite() && hi - x[j] <= 1e-7 * (1.0 + x[j].abs());
        let dual_violation = if at_lower && at_upper {
            0.0
        } else if at_lower {
            (-rc_min).max(0.0)
        } else if at_upper {
            rc_min.max(0.0)
        } else {
            rc_min.abs()
        };
        max_dual = max_dual.max(dual_violation);
        let gap = if lo.is_finite() { x[j] - lo } else { x[j].abs() };
        var_products[j] = (gap * reduced[j]).abs();
        max_primal = max_primal.max(if lo.is_finite() { (lo - x[j]).max(0.0) } else { 0.0 });
        max_primal = max_primal.max(if hi.is_finite() { (x[j] - hi).max(0.0) } else { 0.0 });
    }
    let max_product = row_products
        .iter()
        .chain(var_products.iter())
        .fold(0.0f64, |a, &b| a.max(b));
    SlacknessReport {
        row_products,
        var_products,
        max_product,
        max_primal_residual: max_primal,
        max_dual_residual: max_dual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_x_subject_to_cap() {
        let mut m = LpModel::new(Sense::Maximize);
        let x = m.add_var(1.0);
        m.add_row(Relation::Le, 3.0, vec![(x, 1.0)]);
        let sol = lp_solve(&m, TOL_LP).unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!((sol.primal[x] - 3.0).abs() < 1e-9);
        assert!((sol.dual[0] - 1.0).abs() < 1e-9);
        let report = check_complementary_slackness(&m, &sol, TOL_CS);
        assert!(report.max_product <= TOL_CS);
    }

    #[test]
    fn symmetric_balance_toy() {
        // min lambda + h  s.t.  lambda + h >= 5, lambda = h
        let mut m = LpModel::new(Sense::Minimize);
        let l = m.add_var(1.0);
        let h = m.add_var(1.0);
        m.add_row(Relation::Ge, 5.0, vec![(l, 1.0), (h, 1.0)]);
        m.add_row(Relation::Eq, 0.0, vec![(l, 1.0), (h, -1.0)]);
        let sol = lp_solve(&m, TOL_LP).unwrap();
        assert!((sol.primal[l] - 2.5).abs() < 1e-9);
        assert!((sol.primal[h] - 2.5).abs() < 1e-9);
        assert!((sol.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        let mut m = LpModel::new(Sense::Minimize);
        let x = m.add_var(1.0);
        m.add_row(Relation::Ge, 3.0, vec![(x, 1.0)]);
        m.add_row(Relation::Le, 1.0, vec![(x, 1.0)]);
        assert_eq!(lp_solve(&m, TOL_LP), Err(LpError::Infeasible));
    }

    #[test]
    fn unbounded_detected() {
        let mut m = LpModel::new(Sense::Maximize);
        let x = m.add_var(1.0);
        let y = m.add_var(0.0);
        m.add_row(Relation::Ge, 1.0, vec![(x, 1.0), (y, 1.0)]);
        assert_eq!(lp_solve(&m, TOL_LP), Err(LpError::Unbounded));
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y  s.t.  x - p = 1, y + p = 2, p free
        let mut m = LpModel::new(Sense::Minimize);
        let x = m.add_var(1.0);
        let y = m.add_var(1.0);
        let p = m.add_free_var(0.0);
        m.add_row(Relation::Eq, 1.0, vec![(x, 1.0), (p, -1.0)]);
        m.add_row(Relation::Eq, 2.0, vec![(y, 1.0), (p, 1.0)]);
        let sol = lp_solve(&m, TOL_LP).unwrap();
        // x + y = 3 regardless of p; optimum pins one of x, y at zero.
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!(sol.max_primal_residual <= 1e-9);
        assert!(sol.max_dual_residual <= 1e-9);
    }

    #[test]
    fn determinism_identical_solves() {
        let mut m = LpModel::new(Sense::Maximize);
        let vars: Vec<usize> = (0..6).map(|j| m.add_var(1.0 + 0.1 * j as f64)).collect();
        m.add_row(
            Relation::Le,
            4.0,
            vars.iter().map(|&v| (v, 1.0)).collect(),
        );
        for (k, &v) in vars.iter().enumerate() {
            m.add_row(Relation::Le, 1.0 + (k % 2) as f64, vec![(v, 1.0)]);
        }
        let a = lp_solve(&m, TOL_LP).unwrap();
        let b = lp_solve(&m, TOL_LP).unwrap();
        assert_eq!(a, b);
    }
}
