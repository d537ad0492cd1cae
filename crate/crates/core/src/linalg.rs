//! Small dense linear algebra helpers shared by the solvers.

/// Solve `A x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `None` if the matrix is numerically singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col][col].abs();
        for (r, row) in a.iter().enumerate().skip(col + 1) {
            if row[col].abs() > best {
                best = row[col].abs();
                piv = r;
            }
        }
        if best < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for r in col + 1..n {
            let factor = a[r][col] / d;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col][c] * x[c];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Stationary distribution of a row-stochastic matrix `p` (assumed to have a
/// unique stationary distribution), via the linear system `pi (P - I) = 0`,
/// `sum pi = 1`, with the last balance equation replaced by normalization.
pub fn stationary_dense(p: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = p.len();
    if n == 0 {
        return None;
    }
    // Columns of (P - I)^T give the balance equations; replace the last with
    // the normalization row.
    let mut a = vec![vec![0.0; n]; n];
    for eq in 0..n - 1 {
        for i in 0..n {
            a[eq][i] = p[i][eq] - if i == eq { 1.0 } else { 0.0 };
        }
    }
    for i in 0..n {
        a[n - 1][i] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let pi = solve_dense(a, b)?;
    if pi.iter().any(|&x| x < -1e-9) {
        return None;
    }
    Some(pi.into_iter().map(|x| x.max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve_dense(a, vec![5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_of_two_state_chain() {
        let p = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let pi = stationary_dense(&p).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_detected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve_dense(a, vec![1.0, 2.0]).is_none());
    }
}
