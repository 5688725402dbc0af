//! Small dense and banded solvers used by the kernels and fitters.

use crate::error::{Error, Result};

/// Solves A x = b by Gaussian elimination with partial pivoting.
/// A is row-major, n x n; both inputs are consumed.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for (row, _) in a.iter().zip(0..) {
        if row.len() != n {
            return Err(Error::Shape("dense system is not square".into()));
        }
    }
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        if a[piv][k].abs() < 1e-300 {
            return Err(Error::Domain("singular dense system".into()));
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    Ok(x)
}

/// Thomas algorithm for a tridiagonal system with sub-diagonal `a`,
/// diagonal `b`, super-diagonal `c` (a[0] and c[last] ignored).
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let m = d.len();
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    if b[0].abs() < 1e-300 {
        return Err(Error::Domain("singular tridiagonal system".into()));
    }
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..m {
        let denom = b[i] - a[i] * cp[i - 1];
        if denom.abs() < 1e-300 {
            return Err(Error::Domain("singular tridiagonal system".into()));
        }
        cp[i] = if i < m - 1 { c[i] / denom } else { 0.0 };
        dp[i] = (d[i] - a[i] * dp[i - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = dp[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Ok(x)
}

/// Least-squares fit of y against the given basis columns via the normal
/// equations; returns the coefficient vector.
pub fn least_squares(basis: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let k = basis.len();
    let m = y.len();
    for col in basis {
        if col.len() != m {
            return Err(Error::Shape("least-squares column length mismatch".into()));
        }
    }
    let mut ata = vec![vec![0.0; k]; k];
    let mut aty = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            ata[i][j] = basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
        }
        aty[i] = basis[i].iter().zip(y).map(|(a, b)| a * b).sum();
    }
    solve_dense(ata, aty)
}

/// Slope of the least-squares line through (x_i, y_i).
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let ones = vec![1.0; x.len()];
    let coef = least_squares(&[ones, x.to_vec()], y)?;
    Ok(coef[1])
}
