//! Implicit time integration of the conformal-factor flow
//! `d(u^N)/dt = L_{g0} u`, u(.,0) = 1, on the full domain (Robin outer
//! boundary matched to the harmonic tail) or on exhaustion balls
//! (Dirichlet u = 1).

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::geometry::{radial_derivative, ricci_eigenvalues, riemann_norm_lcf, scalar_curvature};
use crate::grid::{LaplaceOps, RadialGrid};
use crate::initial::ConformalData;
use crate::linalg::solve_tridiagonal;

pub const BLOWUP_MIN_U: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterBc {
    /// d/dr (u-1) + (n-2)(u-1)/r = 0 at R_max, exact for u-1 ~ r^{2-n};
    /// discretized as p_{M-2} (u_{M-1}-1) = p_{M-1} (u_{M-2}-1) with
    /// p = r^{2-n}, which is exact for the same tail.
    RobinDecay,
    /// u(R_max) = 1 (the exhaustion construction's boundary condition).
    DirichletOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeNormalization {
    UTime,
    Geometric,
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    /// Flow horizon; interpreted in u-time or geometric time according to
    /// `time_normalization` (geometric horizons are converted by c_n).
    pub t_end: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub newton_tol: f64,
    pub newton_max_iter: u32,
    pub outer_bc: OuterBc,
    pub diagnostics_stride: usize,
    pub time_normalization: TimeNormalization,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            t_end: 1.0,
            dt_init: 1e-2,
            dt_min: 1e-7,
            dt_max: 0.1,
            newton_tol: 1e-11,
            newton_max_iter: 30,
            outer_bc: OuterBc::RobinDecay,
            diagnostics_stride: 5,
            time_normalization: TimeNormalization::UTime,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::Config(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::Config("Newton tolerance and iteration cap must be positive".into()));
        }
        if self.diagnostics_stride == 0 {
            return Err(Error::Config("diagnostics_stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Horizon in u-time, the clock the integrator always runs on.
    pub fn horizon_u(&self, c: &Constants) -> f64 {
        match self.time_normalization {
            TimeNormalization::UTime => self.t_end,
            TimeNormalization::Geometric => self.t_end * c.c_n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub dt: f64,
    pub newton_iters: u32,
    pub max_residual: f64,
}

/// One Crank-Nicolson step solver bound to a fixed base metric.
pub struct Solver<'a> {
    c: &'a Constants,
    ops: LaplaceOps,
    w0: &'a [f64],
    w0n: Vec<f64>,
    origin_flux: f64,
    outer_bc: OuterBc,
    newton_tol: f64,
    newton_max_iter: u32,
}

impl<'a> Solver<'a> {
    pub fn new(grid: &'a RadialGrid, c: &'a Constants, data: &'a ConformalData, cfg: &FlowConfig) -> Self {
        let ops = LaplaceOps::new(grid, c);
        let w0n = data.w0.iter().map(|&w| w.powf(c.exponent)).collect();
        Solver {
            c,
            ops,
            w0: &data.w0,
            w0n,
            origin_flux: data.w0_origin_flux,
            outer_bc: cfg.outer_bc,
            newton_tol: cfg.newton_tol,
            newton_max_iter: cfg.newton_max_iter,
        }
    }

    /// L_{g0} u = w0^{-N} D0 (w0 u) at nodes 0..M-2; the last entry is the
    /// boundary row's slot and set to zero.
    fn apply_l(&self, u: &[f64]) -> Vec<f64> {
        let m = u.len();
        let mut out = vec![0.0; m];
        let mut flux_in = self.origin_flux * u[0];
        for i in 0..m - 1 {
            let flux_out = self.ops.kappa[i] * (self.w0[i + 1] * u[i + 1] - self.w0[i] * u[i]);
            out[i] = (flux_out - flux_in) / self.ops.vol[i] / self.w0n[i];
            flux_in = flux_out;
        }
        out
    }

    /// Residual of the implicit-trapezoid update:
    /// F(x) = x^N - u^N - dt/2 (L x + L u), with the boundary row replacing
    /// the last component.
    fn residual(&self, x: &[f64], u: &[f64], lu: &[f64], dt: f64) -> Vec<f64> {
        let m = x.len();
        let lx = self.apply_l(x);
        let nn = self.c.exponent;
        let mut f: Vec<f64> = (0..m)
            .map(|i| x[i].powf(nn) - u[i].powf(nn) - 0.5 * dt * (lx[i] + lu[i]))
            .collect();
        f[m - 1] = match self.outer_bc {
            OuterBc::RobinDecay => {
                self.ops.p[m - 2] * (x[m - 1] - 1.0) - self.ops.p[m - 1] * (x[m - 2] - 1.0)
            }
            OuterBc::DirichletOne => x[m - 1] - 1.0,
        };
        f
    }

    /// Tridiagonal Jacobian of `residual` at x.
    fn jacobian(&self, x: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = x.len();
        let nn = self.c.exponent;
        let (mut lo, mut di, mut up) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let k = &self.ops.kappa;
        let v = &self.ops.vol;
        di[0] = nn * x[0].powf(nn - 1.0)
            - 0.5 * dt * (-k[0] * self.w0[0] - self.origin_flux) / v[0] / self.w0n[0];
        up[0] = -0.5 * dt * k[0] * self.w0[1] / v[0] / self.w0n[0];
        for i in 1..m - 1 {
            lo[i] = -0.5 * dt * k[i - 1] * self.w0[i - 1] / v[i] / self.w0n[i];
            di[i] = nn * x[i].powf(nn - 1.0)
                + 0.5 * dt * (k[i] + k[i - 1]) * self.w0[i] / v[i] / self.w0n[i];
            up[i] = -0.5 * dt * k[i] * self.w0[i + 1] / v[i] / self.w0n[i];
        }
        match self.outer_bc {
            OuterBc::RobinDecay => {
                lo[m - 1] = -self.ops.p[m - 1];
                di[m - 1] = self.ops.p[m - 2];
            }
            OuterBc::DirichletOne => {
                di[m - 1] = 1.0;
            }
        }
        (lo, di, up)
    }

    /// Advances u by dt with Newton iteration (initial guess: u itself).
    pub fn step(&self, u: &[f64], dt: f64) -> Result<(Vec<f64>, StepReport)> {
        let lu = self.apply_l(u);
        let mut x = u.to_vec();
        let mut max_res = f64::INFINITY;
        for it in 0..self.newton_max_iter {
            let f = self.residual(&x, u, &lu, dt);
            max_res = f.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            if max_res < self.newton_tol {
                return Ok((x, StepReport { dt, newton_iters: it, max_residual: max_res }));
            }
            let (lo, di, up) = self.jacobian(&x, dt);
            let rhs: Vec<f64> = f.iter().map(|&v| -v).collect();
            let dx = solve_tridiagonal(&lo, &di, &up, &rhs)?;
            for i in 0..x.len() {
                x[i] += dx[i];
            }
            if x.iter().any(|&v| !(v > 0.0)) {
                let min_u = x.iter().cloned().fold(f64::INFINITY, f64::min);
                return Err(Error::BlowUp { t_u: f64::NAN, min_u });
            }
        }
        Err(Error::StepRejected { dt, residual: max_res })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Completed,
    BlowUp { t_u: f64, min_u: f64 },
}

/// Recorded flow history: the initial state, every `diagnostics_stride`-th
/// accepted step, and the final state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times_u: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub outcome: Outcome,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn t_geom(&self, c: &Constants) -> Vec<f64> {
        self.times_u.iter().map(|&t| t / c.c_n).collect()
    }
}

/// Integrates the flow with adaptive step control: reject-and-halve on
/// Newton failure, grow by 1.2x (capped at dt_max) after easy steps.
pub fn evolve(
    grid: &RadialGrid,
    c: &Constants,
    data: &ConformalData,
    cfg: &FlowConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let solver = Solver::new(grid, c, data, cfg);
    let horizon = cfg.horizon_u(c);
    let mut u = data.u.clone();
    let mut t = 0.0f64;
    let mut dt = cfg.dt_init;
    let mut times_u = vec![0.0];
    let mut snapshots = vec![u.clone()];
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    while t < horizon * (1.0 - 1e-14) {
        let step_dt = dt.min(horizon - t);
        match solver.step(&u, step_dt) {
            Ok((next, report)) => {
                u = next;
                t += step_dt;
                accepted += 1;
                let min_u = u.iter().cloned().fold(f64::INFINITY, f64::min);
                if min_u < BLOWUP_MIN_U {
                    times_u.push(t);
                    snapshots.push(u.clone());
                    return Ok(Trajectory {
                        times_u,
                        snapshots,
                        outcome: Outcome::BlowUp { t_u: t, min_u },
                        accepted_steps: accepted,
                        rejected_steps: rejected,
                    });
                }
                if accepted % cfg.diagnostics_stride == 0 {
                    times_u.push(t);
                    snapshots.push(u.clone());
                }
                if report.newton_iters <= 5 {
                    dt = (dt * 1.2).min(cfg.dt_max);
                }
            }
            Err(Error::StepRejected { .. }) => {
                rejected += 1;
                if step_dt <= cfg.dt_min * (1.0 + 1e-12) {
                    let min_u = u.iter().cloned().fold(f64::INFINITY, f64::min);
                    return Ok(Trajectory {
                        times_u,
                        snapshots,
                        outcome: Outcome::BlowUp { t_u: t, min_u },
                        accepted_steps: accepted,
                        rejected_steps: rejected,
                    });
                }
                dt = (dt / 2.0).max(cfg.dt_min);
            }
            Err(Error::BlowUp { min_u, .. }) => {
                return Ok(Trajectory {
                    times_u,
                    snapshots,
                    outcome: Outcome::BlowUp { t_u: t, min_u },
                    accepted_steps: accepted,
                    rejected_steps: rejected,
                });
            }
            Err(e) => return Err(e),
        }
    }
    if *times_u.last().unwrap() < t {
        times_u.push(t);
        snapshots.push(u);
    }
    Ok(Trajectory {
        times_u,
        snapshots,
        outcome: Outcome::Completed,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

#[derive(Debug, Clone)]
pub struct ExhaustionRun {
    pub m_k: f64,
    pub grid: RadialGrid,
    pub trajectory: Trajectory,
    /// sup |u_k - u_prev| over the half-ball r <= m_k_prev / 2, against the
    /// previous (smaller) domain; None for the first domain.
    pub dist_to_prev: Option<f64>,
    /// max over record pairs t1 > t0 and nodes of u(t1)/u(t0); at most
    /// 1 + O(rounding) when R_{g0} >= 0.
    pub max_time_ratio: f64,
}

/// Solves the Dirichlet problems on the exhaustion balls B(o, m_k) with
/// u = 1 on the boundary, reporting the mutual half-ball distances and the
/// time-monotonicity ratio.
pub fn exhaustion_solve(
    grid: &RadialGrid,
    c: &Constants,
    data: &ConformalData,
    cfg: &FlowConfig,
    domain_radii: &[f64],
) -> Result<Vec<ExhaustionRun>> {
    if domain_radii.len() < 2 {
        return Err(Error::Config("exhaustion needs at least two domain radii".into()));
    }
    for w in domain_radii.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config("exhaustion radii must be increasing".into()));
        }
    }
    if *domain_radii.last().unwrap() > grid.r_max() * (1.0 + 1e-12) {
        return Err(Error::Config("exhaustion radii must not exceed the grid radius".into()));
    }
    let solve_one = |&m_k: &f64| -> Result<(f64, RadialGrid, Trajectory)> {
        let sub = grid.truncate(m_k)?;
        let mut sub_data = ConformalData {
            w0: data.w0[..sub.len()].to_vec(),
            u: vec![1.0; sub.len()],
            big_u: data.w0[..sub.len()].to_vec(),
            w0_origin_flux: data.w0_origin_flux,
        };
        sub_data.set_u(vec![1.0; sub.len()]);
        let mut sub_cfg = cfg.clone();
        sub_cfg.outer_bc = OuterBc::DirichletOne;
        let traj = evolve(&sub, c, &sub_data, &sub_cfg)?;
        Ok((m_k, sub, traj))
    };
    let solved = crate::exec::try_map(domain_radii, solve_one)?;
    let mut out: Vec<ExhaustionRun> = Vec::with_capacity(solved.len());
    for (idx, (m_k, sub, traj)) in solved.into_iter().enumerate() {
        let mut max_ratio = f64::NEG_INFINITY;
        for j0 in 0..traj.snapshots.len() {
            for j1 in j0 + 1..traj.snapshots.len() {
                for i in 0..sub.len() {
                    max_ratio = max_ratio.max(traj.snapshots[j1][i] / traj.snapshots[j0][i]);
                }
            }
        }
        let dist_to_prev = if idx == 0 {
            None
        } else {
            let prev = &out[idx - 1];
            let half = prev.m_k / 2.0;
            let n_common = prev
                .grid
                .nodes()
                .iter()
                .take_while(|&&r| r <= half)
                .count();
            let mut d = 0.0f64;
            let records = traj.snapshots.len().min(prev.trajectory.snapshots.len());
            for j in 0..records {
                for i in 0..n_common {
                    d = d.max((traj.snapshots[j][i] - prev.trajectory.snapshots[j][i]).abs());
                }
            }
            Some(d)
        };
        out.push(ExhaustionRun {
            m_k,
            grid: sub,
            trajectory: traj,
            dist_to_prev,
            max_time_ratio: max_ratio,
        });
    }
    Ok(out)
}

/// Two-sided maximum-principle envelope for u at u-time t:
/// (1 +- coeff * sup|R_{g0}| * t)^{(n-2)/4} with
/// coeff = (n-2)/((n-1)(n+2)); the lower bound clamps to 0 once its base
/// turns non-positive.
pub fn max_principle_envelope(t_u: f64, sup_r0: f64, c: &Constants) -> (f64, f64) {
    let n = c.n as f64;
    let coeff = (n - 2.0) / ((n - 1.0) * (n + 2.0));
    let e = (n - 2.0) / 4.0;
    let upper = (1.0 + coeff * sup_r0 * t_u).powf(e);
    let base = 1.0 - coeff * sup_r0 * t_u;
    let lower = if base > 0.0 { base.powf(e) } else { 0.0 };
    (lower, upper)
}

/// Guaranteed-existence window for the Dirichlet step:
/// (n-1)(n+2) delta^{4/(n-2)} / (2 (n-2) sup|R_{g0}|); +infinity when the
/// base curvature vanishes.
pub fn survival_time(delta: f64, sup_r0: f64, c: &Constants) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    if sup_r0 == 0.0 {
        return Ok(f64::INFINITY);
    }
    let n = c.n as f64;
    Ok((n - 1.0) * (n + 2.0) * delta.powf(4.0 / (n - 2.0)) / (2.0 * (n - 2.0) * sup_r0))
}

#[derive(Debug, Clone)]
pub struct FineSolutionReport {
    pub min_u: f64,
    pub max_u: f64,
    pub sup_grad_u: f64,
    pub sup_riemann: f64,
    pub pass: bool,
    pub first_violation: Option<usize>,
}

/// Uniform-bounds monitor: two-sided bounds on u, finite gradient, finite
/// curvature.
pub fn fine_solution_monitor(
    grid: &RadialGrid,
    c: &Constants,
    data: &ConformalData,
    u: &[f64],
    delta_run: f64,
    cap_run: f64,
) -> Result<FineSolutionReport> {
    let min_u = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_u = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let du = radial_derivative(grid, u);
    // gradient magnitude with respect to g0: |grad u|_{g0} = w0^{-2/(n-2)} |u'|
    let sup_grad_u = (0..u.len())
        .map(|i| data.w0[i].powf(-2.0 / (c.n as f64 - 2.0)) * du[i].abs())
        .fold(0.0f64, f64::max);
    let big_u: Vec<f64> = u.iter().zip(&data.w0).map(|(&ui, &wi)| ui * wi).collect();
    let r_scalar = scalar_curvature(grid, c, &big_u, u[0] * data.w0_origin_flux)?;
    let (lam_rad, lam_tan) = ricci_eigenvalues(grid, c, &big_u)?;
    let rm = riemann_norm_lcf(&lam_rad, &lam_tan, &r_scalar, c)?;
    let sup_riemann = rm[..rm.len() - 1].iter().fold(0.0f64, |a, &b| a.max(b));
    let first_violation = u.iter().position(|&v| !(v >= delta_run) || !(v <= cap_run));
    let pass = first_violation.is_none() && sup_grad_u.is_finite() && sup_riemann.is_finite();
    Ok(FineSolutionReport { min_u, max_u, sup_grad_u, sup_riemann, pass, first_violation })
}
