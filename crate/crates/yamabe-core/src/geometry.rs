//! Discrete differential-geometry kernels for metrics `phi^{4/(n-2)} delta`.

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::grid::{LaplaceOps, RadialGrid};

fn check_positive(phi: &[f64], what: &str) -> Result<()> {
    if phi.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("{what} must be positive everywhere")));
    }
    Ok(())
}

fn check_len(grid: &RadialGrid, f: &[f64]) -> Result<()> {
    if f.len() != grid.len() {
        return Err(Error::Shape(format!(
            "field length {} does not match grid length {}",
            f.len(),
            grid.len()
        )));
    }
    if grid.len() < 4 {
        return Err(Error::InvalidGrid("grid too short".into()));
    }
    Ok(())
}

/// Flat radial Laplacian of an even field (zero origin flux).
pub fn flat_radial_laplacian(grid: &RadialGrid, c: &Constants, f: &[f64]) -> Result<Vec<f64>> {
    check_len(grid, f)?;
    let ops = LaplaceOps::new(grid, c);
    Ok(ops.apply(f, 0.0))
}

/// First radial derivative by three-point nonuniform stencils; the origin
/// uses the even reflection (ghost value f(-r_0) = f(r_0)), the outer node a
/// one-sided stencil.
pub fn radial_derivative(grid: &RadialGrid, f: &[f64]) -> Vec<f64> {
    let r = grid.nodes();
    let m = r.len();
    let mut out = vec![0.0; m];
    for i in 0..m {
        let (rm, r0, rp, fm, f0, fp);
        if i == 0 {
            (rm, r0, rp) = (-r[0], r[0], r[1]);
            (fm, f0, fp) = (f[0], f[0], f[1]);
        } else if i == m - 1 {
            let (hm, hp) = (r[m - 2] - r[m - 3], r[m - 1] - r[m - 2]);
            out[i] = (hp / (hm * (hm + hp))) * f[m - 3]
                - ((hm + hp) / (hm * hp)) * f[m - 2]
                + ((hm + 2.0 * hp) / (hp * (hm + hp))) * f[m - 1];
            continue;
        } else {
            (rm, r0, rp) = (r[i - 1], r[i], r[i + 1]);
            (fm, f0, fp) = (f[i - 1], f[i], f[i + 1]);
        }
        let (hm, hp) = (r0 - rm, rp - r0);
        out[i] = (-hp / (hm * (hm + hp))) * fm + ((hp - hm) / (hm * hp)) * f0
            + (hm / (hp * (hm + hp))) * fp;
    }
    out
}

/// Second radial derivative by three-point nonuniform stencils (even ghost
/// at the origin, copy at the outer node).
pub fn radial_second_derivative(grid: &RadialGrid, f: &[f64]) -> Vec<f64> {
    let r = grid.nodes();
    let m = r.len();
    let mut out = vec![0.0; m];
    for i in 0..m - 1 {
        let (rm, fm) = if i == 0 { (-r[0], f[0]) } else { (r[i - 1], f[i - 1]) };
        let (hm, hp) = (r[i] - rm, r[i + 1] - r[i]);
        out[i] = 2.0 * (hp * fm - (hm + hp) * f[i] + hm * f[i + 1]) / (hm * hp * (hm + hp));
    }
    out[m - 1] = out[m - 2];
    out
}

/// Laplace-Beltrami operator of g = phi^{4/(n-2)} delta applied to an even
/// field f: `D_g f = phi^{-4/(n-2)} (D0 f + 2 (phi'/phi) f')`.
pub fn conformal_laplace_beltrami(
    grid: &RadialGrid,
    c: &Constants,
    f: &[f64],
    phi: &[f64],
) -> Result<Vec<f64>> {
    check_len(grid, f)?;
    check_len(grid, phi)?;
    check_positive(phi, "conformal factor")?;
    let ops = LaplaceOps::new(grid, c);
    let lap0 = ops.apply(f, 0.0);
    let df = radial_derivative(grid, f);
    let dphi = radial_derivative(grid, phi);
    let q = -4.0 / (c.n as f64 - 2.0);
    Ok((0..f.len())
        .map(|i| phi[i].powf(q) * (lap0[i] + 2.0 * dphi[i] / phi[i] * df[i]))
        .collect())
}

/// Scalar curvature of g = phi^{4/(n-2)} delta:
/// `R = -(1/a) phi^{-N} D0 phi`.
pub fn scalar_curvature(
    grid: &RadialGrid,
    c: &Constants,
    phi: &[f64],
    phi_origin_flux: f64,
) -> Result<Vec<f64>> {
    check_len(grid, phi)?;
    check_positive(phi, "conformal factor")?;
    let ops = LaplaceOps::new(grid, c);
    let lap = ops.apply(phi, phi_origin_flux);
    Ok(phi
        .iter()
        .zip(&lap)
        .map(|(&ph, &l)| -(1.0 / c.a) * ph.powf(-c.exponent) * l)
        .collect())
}

/// Conformal Laplacian of the base metric g0 = w0^{4/(n-2)} delta applied
/// to an even field f, via the covariance form
/// `L_{g0} f = w0^{-N} D0 (w0 f)`.
pub fn conformal_laplacian(
    grid: &RadialGrid,
    c: &Constants,
    f: &[f64],
    w0: &[f64],
    w0_origin_flux: f64,
) -> Result<Vec<f64>> {
    check_len(grid, f)?;
    check_len(grid, w0)?;
    check_positive(w0, "base factor")?;
    let ops = LaplaceOps::new(grid, c);
    let prod: Vec<f64> = w0.iter().zip(f).map(|(&w, &fi)| w * fi).collect();
    // f is regular, so the origin flux of w0 f is f(0) times the w0 flux.
    let lap = ops.apply(&prod, f[0] * w0_origin_flux);
    Ok((0..f.len()).map(|i| w0[i].powf(-c.exponent) * lap[i]).collect())
}

/// The same operator assembled from its definition
/// `L_{g0} f = D_{g0} f - a R_{g0} f`; used as the covariance cross-check.
pub fn conformal_laplacian_direct(
    grid: &RadialGrid,
    c: &Constants,
    f: &[f64],
    w0: &[f64],
    w0_origin_flux: f64,
) -> Result<Vec<f64>> {
    let lap_g = conformal_laplace_beltrami(grid, c, f, w0)?;
    let r_g0 = scalar_curvature(grid, c, w0, w0_origin_flux)?;
    Ok((0..f.len())
        .map(|i| lap_g[i] - c.a * r_g0[i] * f[i])
        .collect())
}

/// Radial and tangential Ricci eigenvalues (with respect to g, i.e. the
/// eigenvalues of Ric with one index raised) of g = phi^{4/(n-2)} delta.
///
/// With psi = (2/(n-2)) log phi:
///   lambda_rad = e^{-2 psi} (n-1) (-psi'' - psi'/r)
///   lambda_tan = e^{-2 psi} (-psi'' - (2n-3) psi'/r - (n-2) psi'^2)
/// and lambda_rad + (n-1) lambda_tan = R.
pub fn ricci_eigenvalues(
    grid: &RadialGrid,
    c: &Constants,
    phi: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(grid, phi)?;
    check_positive(phi, "conformal factor")?;
    let r = grid.nodes();
    let n = c.n as f64;
    let dphi = radial_derivative(grid, phi);
    let d2phi = radial_second_derivative(grid, phi);
    let mut lam_rad = vec![0.0; phi.len()];
    let mut lam_tan = vec![0.0; phi.len()];
    for i in 0..phi.len() {
        // psi' and psi'' through phi derivatives, never log differences
        let dpsi = (2.0 / (n - 2.0)) * dphi[i] / phi[i];
        let d2psi = (2.0 / (n - 2.0)) * (d2phi[i] / phi[i] - (dphi[i] / phi[i]).powi(2));
        let conf = phi[i].powf(-4.0 / (n - 2.0));
        lam_rad[i] = conf * (n - 1.0) * (-d2psi - dpsi / r[i]);
        lam_tan[i] = conf * (-d2psi - (2.0 * n - 3.0) * dpsi / r[i] - (n - 2.0) * dpsi * dpsi);
    }
    Ok((lam_rad, lam_tan))
}

/// Pointwise |Rm| for a locally conformally flat metric from the Ricci
/// eigenvalues and scalar curvature (Weyl = 0):
/// `|Rm|^2 = (4/(n-2)) |E|^2 + (2/(n(n-1))) R^2` with E the traceless Ricci.
pub fn riemann_norm_lcf(
    lam_rad: &[f64],
    lam_tan: &[f64],
    r_scalar: &[f64],
    c: &Constants,
) -> Result<Vec<f64>> {
    if lam_rad.len() != lam_tan.len() || lam_rad.len() != r_scalar.len() {
        return Err(Error::Shape("Ricci/scalar inputs have mismatched lengths".into()));
    }
    let n = c.n as f64;
    Ok((0..lam_rad.len())
        .map(|i| {
            let e_rad = lam_rad[i] - r_scalar[i] / n;
            let e_tan = lam_tan[i] - r_scalar[i] / n;
            let e2 = e_rad * e_rad + (n - 1.0) * e_tan * e_tan;
            let rm2 = (4.0 / (n - 2.0)) * e2
                + (2.0 / (n * (n - 1.0))) * r_scalar[i] * r_scalar[i];
            rm2.max(0.0).sqrt()
        })
        .collect())
}

/// Radial quadrature weight of the volume form:
/// `dvol = omega * phi^{2n/(n-2)} r^{n-1} dr`.
pub fn volume_element(grid: &RadialGrid, c: &Constants, phi: &[f64]) -> Result<Vec<f64>> {
    check_len(grid, phi)?;
    check_positive(phi, "conformal factor")?;
    let n = c.n as f64;
    Ok(grid
        .nodes()
        .iter()
        .zip(phi)
        .map(|(&r, &ph)| c.omega * ph.powf(2.0 * n / (n - 2.0)) * r.powf(n - 1.0))
        .collect())
}
