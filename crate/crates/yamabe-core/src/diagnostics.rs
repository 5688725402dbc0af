//! Mass extraction, functional identities, residual monitors, and decay
//! tracking over flow trajectories.

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::geometry::{
    conformal_laplace_beltrami, radial_derivative, ricci_eigenvalues, riemann_norm_lcf,
    scalar_curvature,
};
use crate::grid::{LaplaceOps, RadialGrid};
use crate::initial::ConformalData;
use crate::linalg::{fit_slope, least_squares};

/// Value of d f / d p (p = r^{2-n}) at node i by the three-point
/// nonuniform stencil in p.
fn p_derivative_at(p: &[f64], f: &[f64], i: usize) -> f64 {
    let m = p.len();
    let (im, i0, ip) = if i == 0 {
        (0, 1, 2)
    } else if i == m - 1 {
        (m - 3, m - 2, m - 1)
    } else {
        (i - 1, i, i + 1)
    };
    let (x0, x1, x2) = (p[im], p[i0], p[ip]);
    let (f0, f1, f2) = (f[im], f[i0], f[ip]);
    let x = p[i];
    f0 * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
        + f1 * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
        + f2 * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
}

fn node_for_radius(grid: &RadialGrid, radius: f64) -> Result<usize> {
    if !(radius > 0.0) || radius > grid.r_max() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "radius {radius} lies outside the grid (0, {}]",
            grid.r_max()
        )));
    }
    Ok(grid.nearest(radius))
}

/// Mass surface integral at finite radius, in the closed radial form
/// m(r) = (n-1) U^{(6-n)/(n-2)} dU/dp with p = r^{2-n}; exact for
/// U = 1 + A p.
pub fn adm_mass_at_radius(
    grid: &RadialGrid,
    c: &Constants,
    data: &ConformalData,
    radius: f64,
) -> Result<f64> {
    let i = node_for_radius(grid, radius)?;
    let n = c.n as f64;
    let p: Vec<f64> = grid.nodes().iter().map(|&r| r.powf(2.0 - n)).collect();
    let dudp = p_derivative_at(&p, &data.big_u, i);
    Ok((n - 1.0) * data.big_u[i].powf((6.0 - n) / (n - 2.0)) * dudp)
}

/// The same surface integral through the metric conformal factor
/// U^{4/(n-2)}: m(r) = ((1-n)/4) (2-n) d(U^{4/(n-2)})/dp.
pub fn adm_mass_surface(
    grid: &RadialGrid,
    c: &Constants,
    data: &ConformalData,
    radius: f64,
) -> Result<f64> {
    let i = node_for_radius(grid, radius)?;
    let n = c.n as f64;
    let p: Vec<f64> = grid.nodes().iter().map(|&r| r.powf(2.0 - n)).collect();
    let v: Vec<f64> = data.big_u.iter().map(|&u| u.powf(4.0 / (n - 2.0))).collect();
    Ok(((1.0 - n) / 4.0) * (2.0 - n) * p_derivative_at(&p, &v, i))
}

/// Half-decade-spaced ladder radii used by the trajectory diagnostics.
pub fn default_mass_ladder(r_max: f64) -> [f64; 5] {
    [r_max / 100.0, r_max / 31.6, r_max / 10.0, r_max / 3.16, r_max / 1.5]
}

/// Ladder of (node radius, mass) pairs; the requested radii are snapped to
/// grid nodes so the extrapolation model sees the true abscissae.
pub fn mass_ladder(
    grid: &RadialGrid,
    c: &Constants,
    data: &ConformalData,
    radii: &[f64],
) -> Result<Vec<(f64, f64)>> {
    radii
        .iter()
        .map(|&r| {
            let node_r = grid.nodes()[node_for_radius(grid, r)?];
            Ok((node_r, adm_mass_at_radius(grid, c, data, node_r)?))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MassExtrapolation {
    pub value: f64,
    /// Largest model-fit residual over the ladder entries.
    pub spread: f64,
    pub unreliable: bool,
}

/// Extrapolates the ladder to r = infinity with the model
/// m(r) = m + c1/r + c2/r^2.
pub fn adm_mass_extrapolate(ladder: &[(f64, f64)]) -> Result<MassExtrapolation> {
    if ladder.len() < 3 {
        return Err(Error::Domain(format!(
            "mass extrapolation needs >= 3 ladder entries, got {}",
            ladder.len()
        )));
    }
    for w in ladder.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::Domain("ladder radii must be strictly increasing".into()));
        }
    }
    let ones = vec![1.0; ladder.len()];
    let inv_r: Vec<f64> = ladder.iter().map(|&(r, _)| 1.0 / r).collect();
    let inv_r2: Vec<f64> = inv_r.iter().map(|&x| x * x).collect();
    let y: Vec<f64> = ladder.iter().map(|&(_, m)| m).collect();
    let coef = least_squares(&[ones, inv_r.clone(), inv_r2.clone()], &y)?;
    let spread = (0..y.len())
        .map(|i| (y[i] - (coef[0] + coef[1] * inv_r[i] + coef[2] * inv_r2[i])).abs())
        .fold(0.0f64, f64::max);
    let monotone = y.windows(2).all(|w| w[1] >= w[0] - 1e-15)
        || y.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    let data_spread = y.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - y.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let unreliable = !monotone && data_spread > 10.0 * spread.max(1e-30);
    Ok(MassExtrapolation { value: coef[0], spread, unreliable })
}

/// Mass from the far-field coefficient: least-squares fit of
/// r^{n-2}(U - 1) over [r_lo, r_hi] against {1, 1/r, 1/r^2}, times (n-1).
pub fn mass_coefficient_fit(
    grid: &RadialGrid,
    c: &Constants,
    data: &ConformalData,
    r_lo: f64,
    r_hi: f64,
) -> Result<f64> {
    if !(r_lo > 0.0) || r_hi / r_lo < 10f64.sqrt() {
        return Err(Error::Domain(format!(
            "fit window [{r_lo}, {r_hi}] must span at least half a decade"
        )));
    }
    let n = c.n as f64;
    let mut ones = Vec::new();
    let mut inv_r = Vec::new();
    let mut inv_r2 = Vec::new();
    let mut y = Vec::new();
    for (i, &r) in grid.nodes().iter().enumerate() {
        if r >= r_lo && r <= r_hi {
            ones.push(1.0);
            inv_r.push(1.0 / r);
            inv_r2.push(1.0 / (r * r));
            y.push(r.powf(n - 2.0) * (data.big_u[i] - 1.0));
        }
    }
    if y.len() < 4 {
        return Err(Error::Domain("fit window contains fewer than 4 nodes".into()));
    }
    let coef = least_squares(&[ones, inv_r, inv_r2], &y)?;
    Ok((n - 1.0) * coef[0])
}

#[derive(Debug, Clone)]
pub struct FunctionalReport {
    pub value: f64,
    /// Analytic continuation of the last decade's power-law fit to
    /// r = infinity; zero when the integrand sits at rounding level.
    pub tail_estimate: f64,
    pub diverging: bool,
}

/// Radial quadrature weight R * dvol expressed through the flux form:
/// R U^{2n/(n-2)} r^{n-1} = -(1/a) U D0 U r^{n-1}.
fn eh_integrand(grid: &RadialGrid, c: &Constants, data: &ConformalData) -> Vec<f64> {
    let ops = LaplaceOps::new(grid, c);
    let lap = ops.apply(&data.big_u, data.big_u_origin_flux());
    let n = c.n as f64;
    grid.nodes()
        .iter()
        .zip(data.big_u.iter().zip(&lap))
        .map(|(&r, (&u, &l))| -(1.0 / c.a) * u * l * r.powf(n - 1.0))
        .collect()
}

fn tail_fit(grid: &RadialGrid, integrand: &[f64]) -> (f64, bool) {
    let r_lo = grid.r_max() / 10.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut last = 0.0;
    for (i, &r) in grid.nodes().iter().enumerate() {
        if r >= r_lo && i + 1 < grid.len() {
            let a = integrand[i].abs();
            if a > 1e-16 {
                xs.push(r.ln());
                ys.push(a.ln());
                last = a;
            }
        }
    }
    if xs.len() < 4 {
        return (0.0, false);
    }
    let slope = match fit_slope(&xs, &ys) {
        Ok(s) => s,
        Err(_) => return (0.0, false),
    };
    if slope >= -1.0 {
        return (f64::NAN, true);
    }
    // integral of last * (r/r_max)^slope from r_max to infinity
    (last * grid.r_max() / (-slope - 1.0), false)
}

/// Total scalar curvature omega * int R U^{2n/(n-2)} r^{n-1} dr, with a
/// reported (not added) tail-truncation estimate.
pub fn einstein_hilbert(
    grid: &RadialGrid,
    c: &Constants,
    data: &ConformalData,
) -> Result<FunctionalReport> {
    let f = eh_integrand(grid, c, data);
    let value = c.omega * grid.trapezoid(&f);
    let (tail_estimate, diverging) = tail_fit(grid, &f);
    Ok(FunctionalReport { value, tail_estimate, diverging })
}

/// omega * int R^2 U^{2n/(n-2)} r^{n-1} dr.
pub fn r2_integral(grid: &RadialGrid, c: &Constants, data: &ConformalData) -> Result<f64> {
    let r_scalar = scalar_curvature(grid, c, &data.big_u, data.big_u_origin_flux())?;
    let n = c.n as f64;
    let f: Vec<f64> = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            r_scalar[i] * r_scalar[i]
                * data.big_u[i].powf(2.0 * n / (n - 2.0))
                * r.powf(n - 1.0)
        })
        .collect();
    Ok(c.omega * grid.trapezoid(&f))
}

/// Nonuniform three-point derivative of the middle sample of (t, y).
fn central_derivative(t: &[f64; 3], y: &[f64; 3]) -> f64 {
    let (h0, h1) = (t[1] - t[0], t[2] - t[1]);
    -h1 / (h0 * (h0 + h1)) * y[0] + (h1 - h0) / (h0 * h1) * y[1]
        + h0 / (h1 * (h0 + h1)) * y[2]
}

/// Residual of the dissipation identity at the middle record, on the
/// geometric clock:
/// | d/dt int R dvol - 4 omega dm/dt - (1 - n/2) int R^2 dvol |.
pub fn balance_residual(
    times_geom: &[f64; 3],
    eh_values: &[f64; 3],
    masses: &[f64; 3],
    r2_mid: f64,
    c: &Constants,
) -> Result<f64> {
    if !(times_geom[0] < times_geom[1] && times_geom[1] < times_geom[2]) {
        return Err(Error::Domain("balance window times must be increasing".into()));
    }
    let n = c.n as f64;
    let d_eh = central_derivative(times_geom, eh_values);
    let d_m = central_derivative(times_geom, masses);
    Ok((d_eh - 4.0 * c.omega * d_m - (1.0 - n / 2.0) * r2_mid).abs())
}

#[derive(Debug, Clone)]
pub struct ScalarResidualReport {
    pub field: Vec<f64>,
    pub sup: f64,
    /// Nodes inside the interior window r <= window_radius that the sup
    /// ranges over.
    pub window_nodes: usize,
}

/// Residual of the scalar-curvature evolution law at the middle snapshot:
/// d R/dt_geom - (n-1) Lap_{g(t)} R - R^2, sup over r <= window_radius.
///
/// `snapshots` hold u at three consecutive records; the metric factor is
/// U = u * w0.
pub fn scalar_evolution_residual(
    grid: &RadialGrid,
    c: &Constants,
    data: &ConformalData,
    u_snaps: &[&[f64]; 3],
    times_geom: &[f64; 3],
    window_radius: f64,
) -> Result<ScalarResidualReport> {
    if !(times_geom[0] < times_geom[1] && times_geom[1] < times_geom[2]) {
        return Err(Error::Domain("residual window times must be increasing".into()));
    }
    let big_u: Vec<Vec<f64>> = u_snaps
        .iter()
        .map(|u| u.iter().zip(&data.w0).map(|(&ui, &wi)| ui * wi).collect())
        .collect();
    let r_fields: Vec<Vec<f64>> = big_u
        .iter()
        .zip(u_snaps)
        .map(|(bu, u)| scalar_curvature(grid, c, bu, u[0] * data.w0_origin_flux))
        .collect::<Result<_>>()?;
    let lap_r = conformal_laplace_beltrami(grid, c, &r_fields[1], &big_u[1])?;
    let n = c.n as f64;
    let m = grid.len();
    let mut field = vec![0.0; m];
    for i in 0..m {
        let dr_dt = central_derivative(
            times_geom,
            &[r_fields[0][i], r_fields[1][i], r_fields[2][i]],
        );
        field[i] = dr_dt - (n - 1.0) * lap_r[i] - r_fields[1][i] * r_fields[1][i];
    }
    let mut sup = 0.0f64;
    let mut window_nodes = 0;
    for (i, &r) in grid.nodes().iter().enumerate() {
        if r <= window_radius {
            sup = sup.max(field[i].abs());
            window_nodes += 1;
        }
    }
    Ok(ScalarResidualReport { field, sup, window_nodes })
}

#[derive(Debug, Clone)]
pub struct PositivityReport {
    pub min_r: f64,
    pub max_r: f64,
    pub pass: bool,
}

/// Minimum of R over all supplied curvature fields (interior nodes), with
/// the relative pass threshold -1e-8 (1 + max R).
pub fn positivity_monitor(r_fields: &[Vec<f64>]) -> Result<PositivityReport> {
    if r_fields.is_empty() {
        return Err(Error::Domain("positivity monitor needs at least one field".into()));
    }
    let mut min_r = f64::INFINITY;
    let mut max_r = f64::NEG_INFINITY;
    for f in r_fields {
        for &v in &f[..f.len() - 1] {
            min_r = min_r.min(v);
            max_r = max_r.max(v);
        }
    }
    let pass = min_r >= -1e-8 * (1.0 + max_r.abs());
    Ok(PositivityReport { min_r, max_r, pass })
}

#[derive(Debug, Clone)]
pub struct GradientEstimateReport {
    /// sup |Rm| over the ball and all supplied times.
    pub k_sup: f64,
    /// max over t > 0 and r <= ball_radius/2 of
    /// |grad R|_g / (K (1/r^2 + 1/tau + K)^{1/2}); monitored, not asserted.
    pub max_ratio: f64,
    /// Signed max of (d/dt - (n-1) Lap_g) G + G^2 - K^2 at interior records,
    /// with G = min(1/289, 1/cprime) (16 K^2 + R^2) |grad R|^2 / K^4.
    pub eq_residual_max: f64,
    pub cprime: f64,
}

/// Curvature-gradient monitor over a trajectory restricted to the ball
/// r <= ball_radius. Times are geometric; the first snapshot is t = 0 and
/// only enters through K.
pub fn gradient_estimate_monitor(
    grid: &RadialGrid,
    c: &Constants,
    data: &ConformalData,
    u_snaps: &[Vec<f64>],
    times_geom: &[f64],
    ball_radius: f64,
    cprime: f64,
) -> Result<GradientEstimateReport> {
    if u_snaps.len() != times_geom.len() || u_snaps.len() < 2 {
        return Err(Error::Domain("gradient monitor needs >= 2 timed snapshots".into()));
    }
    if !(cprime > 0.0) {
        return Err(Error::Config("cprime must be positive".into()));
    }
    let tau = *times_geom.last().unwrap();
    let n = c.n as f64;
    let m = grid.len();
    let in_ball: Vec<usize> = (0..m - 1).filter(|&i| grid.nodes()[i] <= ball_radius).collect();
    let in_half: Vec<usize> =
        (0..m - 1).filter(|&i| grid.nodes()[i] <= ball_radius / 2.0).collect();

    let mut big_u = Vec::with_capacity(u_snaps.len());
    let mut r_fields = Vec::with_capacity(u_snaps.len());
    let mut grad_r = Vec::with_capacity(u_snaps.len());
    for u in u_snaps {
        let bu: Vec<f64> = u.iter().zip(&data.w0).map(|(&ui, &wi)| ui * wi).collect();
        let rf = scalar_curvature(grid, c, &bu, u[0] * data.w0_origin_flux)?;
        let drf = radial_derivative(grid, &rf);
        // |grad R|_g = U^{-2/(n-2)} |dR/dr|
        let gr: Vec<f64> = (0..m)
            .map(|i| bu[i].powf(-2.0 / (n - 2.0)) * drf[i].abs())
            .collect();
        big_u.push(bu);
        r_fields.push(rf);
        grad_r.push(gr);
    }

    let mut k_sup = 0.0f64;
    for (bu, rf) in big_u.iter().zip(&r_fields) {
        let (lam_rad, lam_tan) = ricci_eigenvalues(grid, c, bu)?;
        let rm = riemann_norm_lcf(&lam_rad, &lam_tan, rf, c)?;
        for &i in &in_ball {
            k_sup = k_sup.max(rm[i]);
        }
    }

    let mut max_ratio = 0.0f64;
    if k_sup > 0.0 && tau > 0.0 {
        for (j, &t) in times_geom.iter().enumerate() {
            if t <= 0.0 {
                continue;
            }
            for &i in &in_half {
                let r = grid.nodes()[i];
                let bound = k_sup * (1.0 / (r * r) + 1.0 / tau + k_sup).sqrt();
                max_ratio = max_ratio.max(grad_r[j][i] / bound);
            }
        }
    }

    let mut eq_residual_max = f64::NEG_INFINITY;
    if k_sup > 0.0 {
        let scale = (1.0f64 / 289.0).min(1.0 / cprime) / k_sup.powi(4);
        let g_fields: Vec<Vec<f64>> = (0..u_snaps.len())
            .map(|j| {
                (0..m)
                    .map(|i| {
                        scale
                            * (16.0 * k_sup * k_sup + r_fields[j][i] * r_fields[j][i])
                            * grad_r[j][i]
                            * grad_r[j][i]
                    })
                    .collect()
            })
            .collect();
        for j in 1..u_snaps.len() - 1 {
            let lap_g = conformal_laplace_beltrami(grid, c, &g_fields[j], &big_u[j])?;
            let tw = [times_geom[j - 1], times_geom[j], times_geom[j + 1]];
            for &i in &in_half {
                let dg = central_derivative(
                    &tw,
                    &[g_fields[j - 1][i], g_fields[j][i], g_fields[j + 1][i]],
                );
                let res = dg - (n - 1.0) * lap_g[i] + g_fields[j][i] * g_fields[j][i]
                    - k_sup * k_sup;
                eq_residual_max = eq_residual_max.max(res);
            }
        }
    }
    if !eq_residual_max.is_finite() {
        eq_residual_max = 0.0;
    }
    Ok(GradientEstimateReport { k_sup, max_ratio, eq_residual_max, cprime })
}

/// Far-field decay exponent of v = 1 - u over [r_lo, r_hi]; None when |v|
/// sits at rounding level throughout the window.
pub fn decay_exponent_fit(
    grid: &RadialGrid,
    u: &[f64],
    r_lo: f64,
    r_hi: f64,
) -> Result<Option<f64>> {
    let v: Vec<f64> = u.iter().map(|&ui| 1.0 - ui).collect();
    crate::norms::decay_exponent_fit(grid.nodes(), &v, r_lo, r_hi)
}

/// One diagnostics row; residual fields are NaN where a centered window is
/// unavailable (first and last records).
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t_u: f64,
    pub t_geom: f64,
    pub mass_ladder: Vec<(f64, f64)>,
    pub mass_extrapolated: f64,
    pub eh_functional: f64,
    pub r2_integral: f64,
    pub min_r: f64,
    pub scalar_residual_sup: f64,
    pub balance_residual: f64,
    pub decay_exponent: f64,
    pub envelope_lo: f64,
    pub envelope_hi: f64,
    pub min_u: f64,
    pub max_u: f64,
}

/// Assembles the per-record diagnostics that depend on a single snapshot;
/// the windowed residuals are filled by `trajectory_records`.
pub fn record_for_state(
    grid: &RadialGrid,
    c: &Constants,
    data: &ConformalData,
    u: &[f64],
    t_u: f64,
    sup_r0: f64,
) -> Result<DiagnosticsRecord> {
    let mut state = data.clone();
    state.set_u(u.to_vec());
    let ladder_radii = default_mass_ladder(grid.r_max());
    let mass_ladder = mass_ladder(grid, c, &state, &ladder_radii)?;
    let extrap = adm_mass_extrapolate(&mass_ladder)?;
    let eh = einstein_hilbert(grid, c, &state)?;
    let r2 = r2_integral(grid, c, &state)?;
    let r_field = scalar_curvature(grid, c, &state.big_u, state.big_u_origin_flux())?;
    let min_r = r_field[..r_field.len() - 1].iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let decay = decay_exponent_fit(grid, u, grid.r_max() / 100.0, grid.r_max() / 2.0)?;
    let (env_lo, env_hi) = crate::flow::max_principle_envelope(t_u, sup_r0, c);
    let min_u = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_u = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(DiagnosticsRecord {
        t_u,
        t_geom: t_u / c.c_n,
        mass_ladder,
        mass_extrapolated: extrap.value,
        eh_functional: eh.value,
        r2_integral: r2,
        min_r,
        scalar_residual_sup: f64::NAN,
        balance_residual: f64::NAN,
        decay_exponent: decay.unwrap_or(f64::NAN),
        envelope_lo: env_lo,
        envelope_hi: env_hi,
        min_u,
        max_u,
    })
}

/// Full diagnostics table for a trajectory: one row per record, with the
/// centered-window residuals at interior records.
pub fn trajectory_records(
    grid: &RadialGrid,
    c: &Constants,
    data: &ConformalData,
    trajectory: &crate::flow::Trajectory,
    sup_r0: f64,
) -> Result<Vec<DiagnosticsRecord>> {
    let times = &trajectory.times_u;
    let snaps = &trajectory.snapshots;
    let mut rows: Vec<DiagnosticsRecord> = crate::exec::try_map(
        &(0..snaps.len()).collect::<Vec<_>>(),
        |&j| record_for_state(grid, c, data, &snaps[j], times[j], sup_r0),
    )?;
    for j in 1..snaps.len() - 1 {
        let tg = [
            times[j - 1] / c.c_n,
            times[j] / c.c_n,
            times[j + 1] / c.c_n,
        ];
        let window = [snaps[j - 1].as_slice(), snaps[j].as_slice(), snaps[j + 1].as_slice()];
        let sres =
            scalar_evolution_residual(grid, c, data, &window, &tg, grid.r_max() / 2.0)?;
        rows[j].scalar_residual_sup = sres.sup;
        let eh = [rows[j - 1].eh_functional, rows[j].eh_functional, rows[j + 1].eh_functional];
        let ms = [
            rows[j - 1].mass_extrapolated,
            rows[j].mass_extrapolated,
            rows[j + 1].mass_extrapolated,
        ];
        rows[j].balance_residual = balance_residual(&tg, &eh, &ms, rows[j].r2_integral, c)?;
    }
    Ok(rows)
}
