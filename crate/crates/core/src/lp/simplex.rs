//! Revised simplex with a dense basis inverse over sparse columns.
//!
//! Two-phase method; Dantzig pricing with lowest-index ties, switching to
//! Bland's rule whenever the objective stalls, so degenerate pivots cannot
//! cycle and solves are deterministic. The basis inverse is recomputed from
//! scratch every 100 pivots.

use super::{audit, LpError, LpModel, LpSolution, LpStatus, Sense};

const REFACTOR_EVERY: u32 = 100;
const STALL_LIMIT: u32 = 40;
const PIVOT_TOL: f64 = 1e-9;
const MAX_DENSE_ROWS: usize = 4000;

/// How a user variable maps into internal non-negative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = v_j`
    Direct(usize),
    /// `x = v_p - v_m`
    Split(usize, usize),
    /// `x = offset + scale * v_j` with `scale` +-1
    Affine { col: usize, offset: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct Standard {
    m: usize,
    /// CSC storage for all columns (structural, slack, artificial).
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<f64>,
    kind: Vec<ColKind>,
    /// Phase-2 internal cost per column.
    cost: Vec<f64>,
    b: Vec<f64>,
    row_sign: Vec<f64>,
    n_user_rows: usize,
    maps: Vec<VarMap>,
    obj_const: f64,
    obj_scale: f64,
    init_basis: Vec<usize>,
}

fn build_standard(model: &LpModel) -> Result<Standard, LpError> {
    let n_user = model.num_vars();
    let obj_scale = match model.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    // Assign internal structural columns per user variable.
    let mut maps = Vec::with_capacity(n_user);
    let mut struct_cost: Vec<f64> = Vec::new();
    let mut extra_bound_rows: Vec<(usize, f64)> = Vec::new(); // (col, ub)
    for j in 0..n_user {
        let c = obj_scale * model.objective()[j];
        let lo = model.lower()[j];
        let hi = model.upper()[j];
        if !lo.is_finite() && !hi.is_finite() {
            let p = struct_cost.len();
            struct_cost.push(c);
            struct_cost.push(-c);
            maps.push(VarMap::Split(p, p + 1));
        } else if lo.is_finite() {
            let col = struct_cost.len();
            struct_cost.push(c);
            if lo == 0.0 && !hi.is_finite() {
                maps.push(VarMap::Direct(col));
            } else {
                maps.push(VarMap::Affine {
                    col,
                    offset: lo,
                    scale: 1.0,
                });
                if hi.is_finite() {
                    extra_bound_rows.push((col, hi - lo));
                }
            }
        } else {
            // lo = -inf, hi finite: x = hi - v
            let col = struct_cost.len();
            struct_cost.push(-c);
            maps.push(VarMap::Affine {
                col,
                offset: hi,
                scale: -1.0,
            });
        }
    }
    let n_struct = struct_cost.len();
    let n_user_rows = model.num_rows();
    let m = n_user_rows + extra_bound_rows.len();
    if m > MAX_DENSE_ROWS {
        return Err(LpError::Malformed(format!(
            "{m} rows exceed the dense-basis limit; solve through the dual"
        )));
    }

    // Row rhs after substituting variable offsets.
    let mut b = vec![0.0; m];
    let mut obj_const = 0.0;
    for (j, map) in maps.iter().enumerate() {
        if let VarMap::Affine { offset, .. } = map {
            obj_const += obj_scale * model.objective()[j] * offset;
        }
    }
    for (i, row) in model.rows().iter().enumerate() {
        let mut rhs = row.rhs;
        for &(j, v) in &row.coeffs {
            if let VarMap::Affine { offset, .. } = maps[j] {
                rhs -= v * offset;
            }
        }
        b[i] = rhs;
    }
    for (k, &(_, ub)) in extra_bound_rows.iter().enumerate() {
        b[n_user_rows + k] = ub;
    }

    use super::Relation;
    let mut row_sign = vec![1.0; m];
    for i in 0..m {
        if b[i] < 0.0 {
            row_sign[i] = -1.0;
            b[i] = -b[i];
        }
    }

    // Structural columns in CSC form, built row-by-row then sorted by column.
    let mut triplets: Vec<(usize, u32, f64)> = Vec::new();
    for (i, row) in model.rows().iter().enumerate() {
        for &(j, v) in &row.coeffs {
            let signed = v * row_sign[i];
            match maps[j] {
                VarMap::Direct(c) => triplets.push((c, i as u32, signed)),
                VarMap::Split(p, q) => {
                    triplets.push((p, i as u32, signed));
                    triplets.push((q, i as u32, -signed));
                }
                VarMap::Affine { col, scale, .. } => {
                    triplets.push((col, i as u32, signed * scale))
                }
            }
        }
    }
    for (k, &(col, _)) in extra_bound_rows.iter().enumerate() {
        let i = n_user_rows + k;
        triplets.push((col, i as u32, row_sign[i]));
    }

    // Slack columns and artificial columns; record the starting basis.
    let mut kind = vec![ColKind::Structural; n_struct];
    let mut cost = struct_cost;
    let mut init_basis = vec![usize::MAX; m];
    let mut next_col = n_struct;
    for i in 0..m {
        let relation = if i < n_user_rows {
            model.rows()[i].relation
        } else {
            Relation::Le
        };
        let slack_coeff = match relation {
            Relation::Le => row_sign[i],
            Relation::Ge => -row_sign[i],
            Relation::Eq => 0.0,
        };
        if slack_coeff != 0.0 {
            triplets.push((next_col, i as u32, slack_coeff));
            kind.push(ColKind::Slack);
            cost.push(0.0);
            if slack_coeff > 0.0 {
                init_basis[i] = next_col;
            }
            next_col += 1;
        }
    }
    for (i, slot) in init_basis.iter_mut().enumerate() {
        if *slot == usize::MAX {
            triplets.push((next_col, i as u32, 1.0));
            kind.push(ColKind::Artificial);
            cost.push(0.0);
            *slot = next_col;
            next_col += 1;
        }
    }

    triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let n_cols = next_col;
    let mut col_ptr = vec![0usize; n_cols + 1];
    for &(c, _, _) in &triplets {
        col_ptr[c + 1] += 1;
    }
    for c in 0..n_cols {
        col_ptr[c + 1] += col_ptr[c];
    }
    let row_idx: Vec<u32> = triplets.iter().map(|t| t.1).collect();
    let values: Vec<f64> = triplets.iter().map(|t| t.2).collect();

    Ok(Standard {
        m,
        col_ptr,
        row_idx,
        values,
        kind,
        cost,
        b,
        row_sign,
        n_user_rows,
        maps,
        obj_const,
        obj_scale,
        init_basis,
    })
}

struct Tableau<'a> {
    std: &'a Standard,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>, // m x m row-major
    xb: Vec<f64>,
    pivots_since_refactor: u32,
}

impl<'a> Tableau<'a> {
    fn new(std: &'a Standard) -> Self {
        let m = std.m;
        let mut t = Tableau {
            std,
            basis: std.init_basis.clone(),
            in_basis: vec![false; std.cost.len()],
            binv: vec![0.0; m * m],
            xb: vec![0.0; m],
            pivots_since_refactor: 0,
        };
        for &c in &t.basis.clone() {
            t.in_basis[c] = true;
        }
        t.refactor().expect("initial basis is triangular");
        t
    }

    fn col(&self, j: usize) -> (&[u32], &[f64]) {
        let lo = self.std.col_ptr[j];
        let hi = self.std.col_ptr[j + 1];
        (&self.std.row_idx[lo..hi], &self.std.values[lo..hi])
    }

    /// Recompute the basis inverse and basic solution from scratch.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.std.m;
        // Dense basis matrix.
        let mut mat = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                mat[i as usize * m + k] = v;
            }
        }
        // Gauss-Jordan inversion with partial pivoting.
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = mat[col * m + col].abs();
            for r in col + 1..m {
                let a = mat[r * m + col].abs();
                if a > best {
                    best = a;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(LpError::NumericFailure("singular basis".into()));
            }
            if piv != col {
                for c in 0..m {
                    mat.swap(col * m + c, piv * m + c);
                    inv.swap(col * m + c, piv * m + c);
                }
            }
            let d = mat[col * m + col];
            for c in 0..m {
                mat[col * m + c] /= d;
                inv[col * m + c] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = mat[r * m + col];
                if f == 0.0 {
                    continue;
                }
                for c in 0..m {
                    mat[r * m + c] -= f * mat[col * m + c];
                    inv[r * m + c] -= f * inv[col * m + c];
                }
            }
        }
        self.binv = inv;
        // xb = binv * b
        let mut xb = vec![0.0; m];
        for i in 0..m {
            let mut s = 0.0;
            let row = &self.binv[i * m..(i + 1) * m];
            for (k, &bk) in self.std.b.iter().enumerate() {
                s += row[k] * bk;
            }
            xb[i] = s;
        }
        self.xb = xb;
        self.pivots_since_refactor = 0;
        Ok(())
    }

    /// Dual vector for the given cost function restricted to the basis.
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.std.m;
        let mut y = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb == 0.0 {
                continue;
            }
            for i in 0..m {
                y[i] += cb * self.binv[k * m + i];
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        let (rows, vals) = self.col(j);
        let mut rc = cost[j];
        for (&i, &v) in rows.iter().zip(vals) {
            rc -= y[i as usize] * v;
        }
        rc
    }

    fn direction(&self, j: usize) -> Vec<f64> {
        let m = self.std.m;
        let (rows, vals) = self.col(j);
        let mut d = vec![0.0; m];
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let mut s = 0.0;
            for (&r, &v) in rows.iter().zip(vals) {
                s += row[r as usize] * v;
            }
            d[i] = s;
        }
        d
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .map(|(&j, &x)| cost[j] * x)
            .sum()
    }

    /// Run simplex iterations for one phase. `allow_artificial` permits
    /// artificial columns to enter (phase 1 only).
    fn run_phase(&mut self, cost: &[f64], allow_artificial: bool) -> Result<(), LpError> {
        let mut bland = false;
        let mut stall: u32 = 0;
        let mut last_obj = self.objective(cost);
        let max_pivots = 10_000 + 30 * self.std.m as u64 + self.std.cost.len() as u64 / 4;
        for _ in 0..max_pivots {
            let y = self.duals(cost);
            // Pricing.
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.std.cost.len() {
                if self.in_basis[j] {
                    continue;
                }
                if !allow_artificial && self.std.kind[j] == ColKind::Artificial {
                    continue;
                }
                let rc = self.reduced_cost(j, cost, &y);
                if rc < -PIVOT_TOL {
                    if bland {
                        enter = Some((j, rc));
                        break;
                    }
                    match enter {
                        Some((_, best)) if rc >= best => {}
                        _ => enter = Some((j, rc)),
                    }
                }
            }
            let Some((j_in, _)) = enter else {
                return Ok(()); // phase optimal
            };
            let d = self.direction(j_in);
            // Ratio test: smallest ratio; artificial basics block at any
            // nonzero pivot so they are driven out and never regrow.
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.std.m {
                let basic = self.basis[i];
                let is_art = self.std.kind[basic] == ColKind::Artificial;
                let eligible = if is_art && !allow_artificial {
                    d[i].abs() > PIVOT_TOL
                } else {
                    d[i] > PIVOT_TOL
                };
                if !eligible {
                    continue;
                }
                let ratio = (self.xb[i] / d[i]).max(0.0);
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - 1e-12
                            || (ratio < lr + 1e-12 && {
                                let lb = self.basis[li];
                                let la = self.std.kind[lb] == ColKind::Artificial;
                                // prefer kicking artificials, then lowest col
                                (is_art && !la) || (is_art == la && basic < lb)
                            })
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((r, theta)) = leave else {
                return Err(LpError::Unbounded);
            };
            // Pivot.
            let out = self.basis[r];
            self.in_basis[out] = false;
            self.in_basis[j_in] = true;
            self.basis[r] = j_in;
            let dr = d[r];
            let m = self.std.m;
            for i in 0..m {
                if i == r {
                    continue;
                }
                let f = d[i] / dr;
                if f == 0.0 {
                    continue;
                }
                for c in 0..m {
                    self.binv[i * m + c] -= f * self.binv[r * m + c];
                }
                self.xb[i] -= theta * d[i];
                if self.xb[i] < 0.0 && self.xb[i] > -1e-11 {
                    self.xb[i] = 0.0;
                }
            }
            for c in 0..m {
                self.binv[r * m + c] /= dr;
            }
            self.xb[r] = theta;
            self.pivots_since_refactor += 1;
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let obj = self.objective(cost);
            if obj < last_obj - 1e-12 * (1.0 + last_obj.abs()) {
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall >= STALL_LIMIT {
                    bland = true;
                }
            }
            last_obj = obj;
        }
        Err(LpError::NumericFailure("pivot limit exceeded".into()))
    }
}

pub(super) fn solve(model: &LpModel, tol: f64) -> Result<LpSolution, LpError> {
    let std = build_standard(model)?;
    let mut tab = Tableau::new(&std);

    // Phase 1: minimize the sum of artificial variables.
    let needs_phase1 = std
        .kind
        .iter()
        .any(|&k| k == ColKind::Artificial);
    if needs_phase1 {
        let mut c1 = vec![0.0; std.cost.len()];
        for (j, k) in std.kind.iter().enumerate() {
            if *k == ColKind::Artificial {
                c1[j] = 1.0;
            }
        }
        match tab.run_phase(&c1, true) {
            Ok(()) => {}
            Err(LpError::Unbounded) => {
                return Err(LpError::NumericFailure(
                    "phase 1 reported unbounded".into(),
                ))
            }
            Err(e) => return Err(e),
        }
        let feas = tab.objective(&c1);
        let scale = 1.0 + std.b.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if feas > tol.max(1e-9) * scale * 10.0 {
            return Err(LpError::Infeasible);
        }
    }

    // Phase 2 on the real costs.
    tab.run_phase(&std.cost, false)?;
    tab.refactor()?;
    if tab.xb.iter().any(|&x| x < -1e-7) {
        return Err(LpError::NumericFailure(
            "negative basic variable after refactor".into(),
        ));
    }

    extract(model, &std, &tab, tol)
}

fn extract(
    model: &LpModel,
    std: &Standard,
    tab: &Tableau,
    tol: f64,
) -> Result<LpSolution, LpError> {
    // Internal structural values.
    let mut v = vec![0.0; std.cost.len()];
    for (i, &j) in tab.basis.iter().enumerate() {
        v[j] = tab.xb[i].max(0.0);
    }
    let mut x = vec![0.0; model.num_vars()];
    for (j, map) in std.maps.iter().enumerate() {
        x[j] = match *map {
            VarMap::Direct(c) => v[c],
            VarMap::Split(p, q) => v[p] - v[q],
            VarMap::Affine { col, offset, scale } => offset + scale * v[col],
        };
    }
    let y_int = tab.duals(&std.cost);
    let mut y = vec![0.0; model.num_rows()];
    for i in 0..model.num_rows() {
        y[i] = std.obj_scale * std.row_sign[i] * y_int[i];
    }
    let report = audit(model, &x, &y);
    let scale = 1.0
        + model
            .rows()
            .iter()
            .fold(0.0f64, |a, r| a.max(r.rhs.abs()));
    if report.max_primal_residual > tol * scale * 100.0
        || report.max_dual_residual
            > tol * 100.0 * (1.0 + model.objective().iter().fold(0.0f64, |a, &c| a.max(c.abs())))
    {
        return Err(LpError::NumericFailure(format!(
            "residuals too large: primal {}, dual {}",
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
        for &(j, vv) in &row.coeffs {
            reduced[j] -= y[i] * vv;
        }
    }
    let _ = std.obj_const; // objective recomputed directly in user space
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
