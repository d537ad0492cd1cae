//! Explicit dualization: solve a rows-heavy model through its dual and map
//! the solution back. The basis of the simplex is square in the row
//! dimension, so a model with many constraints and few variables is far
//! cheaper to solve in the transposed orientation.

use super::{audit, LpError, LpModel, LpSolution, LpStatus, Relation, Sense};

/// The dualizer handles minimize models whose variables are either
/// non-negative or free (which is every dual program built in this crate).
pub(super) fn dualizable(model: &LpModel) -> bool {
    model.sense == Sense::Minimize
        && (0..model.num_vars()).all(|j| {
            let lo = model.lower()[j];
            let hi = model.upper()[j];
            hi == f64::INFINITY && (lo == 0.0 || lo == f64::NEG_INFINITY)
        })
}

/// Build the dual of a `min c'x` model: `max b'y` with one variable per
/// original row (sign-constrained by the row relation) and one constraint
/// per original variable.
fn build_dual(model: &LpModel) -> Result<LpModel, LpError> {
    if !dualizable(model) {
        return Err(LpError::Malformed(
            "dualization requires a minimize model with non-negative or free variables".into(),
        ));
    }
    let mut dual = LpModel::new(Sense::Maximize);
    // y_i >= 0 for >= rows, free for = rows; <= 0 rows enter negated.
    let mut yscale = Vec::with_capacity(model.num_rows());
    for row in model.rows() {
        match row.relation {
            Relation::Ge => {
                dual.add_var(row.rhs);
                yscale.push(1.0);
            }
            Relation::Eq => {
                dual.add_free_var(row.rhs);
                yscale.push(1.0);
            }
            Relation::Le => {
                dual.add_var(-row.rhs);
                yscale.push(-1.0);
            }
        }
    }
    // Column view of the original matrix.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, row) in model.rows().iter().enumerate() {
        for &(j, v) in &row.coeffs {
            cols[j].push((i, v * yscale[i]));
        }
    }
    for (j, col) in cols.into_iter().enumerate() {
        let rel = if model.lower()[j] == 0.0 {
            Relation::Le
        } else {
            Relation::Eq
        };
        dual.add_row(rel, model.objective()[j], col);
    }
    Ok(dual)
}

/// Solve `model` through its explicit dual; the returned solution is for the
/// original model with residuals audited against it.
pub fn solve_via_dual(model: &LpModel, tol: f64) -> Result<LpSolution, LpError> {
    let dual = build_dual(model)?;
    let dsol = match super::lp_solve(&dual, tol) {
        Ok(s) => s,
        // Dual infeasible means primal unbounded-or-infeasible; dual
        // unbounded means primal infeasible.
        Err(LpError::Unbounded) => return Err(LpError::Infeasible),
        Err(LpError::Infeasible) => return Err(LpError::Unbounded),
        Err(e) => return Err(e),
    };
    // Original primal values are the duals of the dual's rows; original row
    // duals are the dual's primal values (undoing the sign flip on <= rows).
    let mut x = dsol.dual.clone();
    for (j, xj) in x.iter_mut().enumerate() {
        if model.lower()[j] == 0.0 && *xj < 0.0 {
            if *xj < -1e-7 {
                return Err(LpError::NumericFailure(format!(
                    "negative primal {xj} recovered from dual row {j}"
                )));
            }
            *xj = 0.0;
        }
    }
    let mut y = vec![0.0; model.num_rows()];
    for (i, yi) in y.iter_mut().enumerate() {
        let scale = match model.rows()[i].relation {
            Relation::Le => -1.0,
            _ => 1.0,
        };
        *yi = scale * dsol.primal[i];
    }
    let report = audit(model, &x, &y);
    let scale = 1.0
        + model
            .rows()
            .iter()
            .fold(0.0f64, |a, r| a.max(r.rhs.abs()));
    if report.max_primal_residual > tol * scale * 100.0 || report.max_dual_residual > tol * 1e3 {
        return Err(LpError::NumericFailure(format!(
            "dual-solve residuals too large: primal {}, dual {}",
            report.max_primal_residual, report.max_dual_residual
        )));
    }
    let objective: f64 = model
        .objective()
        .iter()
        .zip(&x)
        .map(|(&c, &xj)| c * xj)
        .sum();
    let mut reduced = model.objective().to_vec();
    for (i, row) in model.rows().iter().enumerate() {
        for &(j, v) in &row.coeffs {
            reduced[j] -= y[i] * v;
        }
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        primal: x,
        dual: y,
        reduced_costs: reduced,
        max_primal_residual: report.max_primal_residual,
        max_dual_residual: report.max_dual_residual,
        max_cs_residual: report.max_product,
    })
}
