//! End-to-end acceptance gate: ten numbered criteria, one printed pass/fail
//! line each (run with --nocapture to see them all).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use yamabe_core::constants::Constants;
use yamabe_core::diagnostics::{self, *};
use yamabe_core::flow::*;
use yamabe_core::geometry::{conformal_laplacian, conformal_laplacian_direct, scalar_curvature};
use yamabe_core::grid::RadialGrid;
use yamabe_core::initial::*;
use yamabe_core::norms::*;

fn report(idx: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {idx:02} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {idx:02} {name} failed: {detail}");
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join("/")
}

fn pair_orders(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).ln() / 2f64.ln()).collect()
}

fn fixed_dt_cfg(t_end: f64, dt: f64) -> FlowConfig {
    FlowConfig { t_end, dt_init: dt, dt_min: dt, dt_max: dt, ..Default::default() }
}

fn record_masses(grid: &RadialGrid, c: &Constants, data: &ConformalData, traj: &Trajectory) -> Vec<f64> {
    let radii = default_mass_ladder(grid.r_max());
    traj.snapshots
        .iter()
        .map(|u| {
            let mut st = data.clone();
            st.set_u(u.clone());
            let ladder = mass_ladder(grid, c, &st, &radii).unwrap();
            adm_mass_extrapolate(&ladder).unwrap().value
        })
        .collect()
}

const LEVELS: [(f64, f64, usize); 3] = [(0.04, 1.016, 50), (0.02, 1.008, 100), (0.01, 1.004, 200)];

struct Run500 {
    rows: Vec<DiagnosticsRecord>,
    times_u: Vec<f64>,
}

static RUNS_500: OnceLock<Vec<Run500>> = OnceLock::new();

/// Unit-horizon bump runs at three matched space-time resolutions,
/// shared by the dissipation and curvature-evolution criteria.
fn runs_500() -> &'static Vec<Run500> {
    RUNS_500.get_or_init(|| {
        let c = Constants::new(3).unwrap();
        LEVELS
            .iter()
            .map(|&(h0, s, nst)| {
                let grid = RadialGrid::geometric(h0, s, 500.0).unwrap();
                let data = build_bump(&grid, &c, 0.1, 2.0, 1.0, 0.0).unwrap();
                let rep = verify_nonneg_scalar(&data, &grid, &c).unwrap();
                let cfg = fixed_dt_cfg(1.0, 1.0 / nst as f64);
                let traj = evolve(&grid, &c, &data, &cfg).unwrap();
                assert_eq!(traj.outcome, Outcome::Completed);
                let rows = trajectory_records(&grid, &c, &data, &traj, rep.max_abs_r).unwrap();
                Run500 { rows, times_u: traj.times_u.clone() }
            })
            .collect()
    })
}

struct BumpRun {
    grid: RadialGrid,
    data: ConformalData,
    traj: Trajectory,
    sup_r0: f64,
    masses: Vec<f64>,
}

static BUMP_2000: OnceLock<Vec<Vec<BumpRun>>> = OnceLock::new();

/// Large-domain bump runs on the geometric clock, t_geom in [0, 0.2], for
/// n in {3,4,5} at three resolutions; shared by the mass-invariance,
/// positivity, and envelope criteria.
fn bump_2000() -> &'static Vec<Vec<BumpRun>> {
    BUMP_2000.get_or_init(|| {
        [3u32, 4, 5]
            .iter()
            .map(|&n| {
                let c = Constants::new(n).unwrap();
                LEVELS
                    .iter()
                    .map(|&(h0, s, nst0)| {
                        let grid = RadialGrid::geometric(h0, s, 2000.0).unwrap();
                        let data = build_bump(&grid, &c, 0.1, 2.0, 1.0, 0.0).unwrap();
                        let rep = verify_nonneg_scalar(&data, &grid, &c).unwrap();
                        assert!(rep.pass);
                        let t_u = 0.2 * c.c_n;
                        let dt = t_u / (2 * nst0) as f64;
                        let cfg = FlowConfig {
                            t_end: 0.2,
                            dt_init: dt,
                            dt_min: dt,
                            dt_max: dt,
                            time_normalization: TimeNormalization::Geometric,
                            ..Default::default()
                        };
                        let traj = evolve(&grid, &c, &data, &cfg).unwrap();
                        assert_eq!(traj.outcome, Outcome::Completed);
                        let masses = record_masses(&grid, &c, &data, &traj);
                        BumpRun { grid, data, traj, sup_r0: rep.max_abs_r, masses }
                    })
                    .collect()
            })
            .collect()
    })
}

fn tailed_bump_1000() -> (Constants, RadialGrid, ConformalData, f64) {
    let c = Constants::new(3).unwrap();
    let grid = RadialGrid::geometric(0.02, 1.004, 1000.0).unwrap();
    let data = build_bump(&grid, &c, 0.05, 2.0, 1.0, 0.05).unwrap();
    let rep = verify_nonneg_scalar(&data, &grid, &c).unwrap();
    assert!(rep.pass);
    (c, grid, data, rep.max_abs_r)
}

#[test]
fn criterion_01_stationary_profile() {
    let c = Constants::new(3).unwrap();
    let grid = RadialGrid::geometric(0.02, 1.004, 3000.0).unwrap();
    let data = build_schwarzschild(&grid, &c, 1.0).unwrap();
    let cfg = FlowConfig { t_end: 1.0, dt_init: 0.01, dt_max: 0.1, ..Default::default() };
    let traj = evolve(&grid, &c, &data, &cfg).unwrap();
    let mut sup_dev = 0.0f64;
    for s in &traj.snapshots {
        for &v in s {
            sup_dev = sup_dev.max((v - 1.0).abs());
        }
    }
    let masses = record_masses(&grid, &c, &data, &traj);
    let mass_err = masses.iter().map(|&m| (m - 1.0).abs()).fold(0.0f64, f64::max);
    let pass = traj.outcome == Outcome::Completed && sup_dev <= 1e-10 && mass_err <= 1e-6;
    report(
        1,
        "stationary-profile",
        pass,
        &format!("sup|u-1|={sup_dev:.2e}, max mass error={mass_err:.2e}"),
    );
}

#[test]
fn criterion_02_mass_invariance() {
    let mut detail = String::new();
    let mut pass = true;
    for (run_family, n) in bump_2000().iter().zip([3u32, 4, 5]) {
        let drifts: Vec<f64> = run_family
            .iter()
            .map(|run| {
                let m0 = run.masses[0];
                run.masses.iter().map(|&m| (m - m0).abs()).fold(0.0f64, f64::max)
                    / m0.abs().max(1e-6)
            })
            .collect();
        let baseline_ok = drifts[1] <= 1e-3;
        let at_floor = drifts.iter().all(|&d| d <= 1e-8);
        let order_ok = at_floor || pair_orders(&drifts).iter().all(|&o| o >= 1.9);
        pass &= baseline_ok && order_ok;
        detail.push_str(&format!(
            "n={n} drifts={:.1e}/{:.1e}/{:.1e}{} ",
            drifts[0],
            drifts[1],
            drifts[2],
            if at_floor { " (at floor)" } else { "" }
        ));
    }
    report(2, "mass-invariance", pass, detail.trim());
}

/// Index of the record nearest u-time 0.5.
fn mid_record(times_u: &[f64]) -> usize {
    times_u
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
        .unwrap()
        .0
}

#[test]
fn criterion_03_dissipation_identity() {
    let c = Constants::new(3).unwrap();
    let runs = runs_500();
    let bres: Vec<f64> = runs
        .iter()
        .map(|r| r.rows[mid_record(&r.times_u)].balance_residual)
        .collect();
    let orders = pair_orders(&bres);
    let order_ok = orders.iter().all(|&o| o >= 1.9);

    // baseline bound 5 (h^2 + dt^2) * scale with the scale of the identity's
    // quadratic dissipation term
    let (h0, _, nst) = LEVELS[1];
    let base = &runs[1];
    let mid = mid_record(&base.times_u);
    let scale = (1.0 - c.n as f64 / 2.0).abs() * base.rows[mid].r2_integral;
    let dt = 1.0 / nst as f64;
    let bound = 5.0 * (h0 * h0 + dt * dt) * scale;
    let baseline_ok = bres[1] <= bound;

    // total scalar curvature must not increase along any record sequence
    let mut eh_mono = true;
    for run in runs {
        let mut prev = f64::INFINITY;
        for row in &run.rows {
            if row.eh_functional > prev + 1e-9 {
                eh_mono = false;
            }
            prev = row.eh_functional;
        }
    }
    report(
        3,
        "dissipation-identity",
        order_ok && baseline_ok && eh_mono,
        &format!(
            "residuals={} orders={orders:.2?} baseline {:.2e}<={bound:.2e} eh_mono={eh_mono}",
            fmt_vec(&bres),
            bres[1]
        ),
    );
}

#[test]
fn criterion_04_curvature_evolution_law() {
    let runs = runs_500();
    let sres: Vec<f64> = runs
        .iter()
        .map(|r| r.rows[mid_record(&r.times_u)].scalar_residual_sup)
        .collect();
    let orders = pair_orders(&sres);
    let pass = orders.iter().all(|&o| o >= 1.9);
    report(
        4,
        "curvature-evolution-law",
        pass,
        &format!("residuals={} orders={orders:.2?}", fmt_vec(&sres)),
    );
}

#[test]
fn criterion_05_curvature_positivity() {
    let mut pass = true;
    let mut detail = String::new();
    for (run_family, n) in bump_2000().iter().zip([3u32, 4, 5]) {
        let c = Constants::new(n).unwrap();
        let mut worst_min = f64::INFINITY;
        for run in run_family {
            let fields: Vec<Vec<f64>> = run
                .traj
                .snapshots
                .iter()
                .map(|u| {
                    let mut st = run.data.clone();
                    st.set_u(u.clone());
                    scalar_curvature(&run.grid, &c, &st.big_u, st.big_u_origin_flux()).unwrap()
                })
                .collect();
            let rep = positivity_monitor(&fields).unwrap();
            pass &= rep.pass;
            worst_min = worst_min.min(rep.min_r);
        }
        detail.push_str(&format!("n={n} min_R={worst_min:.2e} "));
    }
    report(5, "curvature-positivity", pass, detail.trim());
}

#[test]
fn criterion_06_comparison_envelope() {
    let mut pass = true;
    let mut detail = String::new();
    for (run_family, n) in bump_2000().iter().zip([3u32, 4, 5]) {
        let c = Constants::new(n).unwrap();
        let run = &run_family[1];
        let mut worst_gap = 0.0f64;
        for (j, s) in run.traj.snapshots.iter().enumerate() {
            let (lo, hi) = max_principle_envelope(run.traj.times_u[j], run.sup_r0, &c);
            let min_u = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let max_u = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            worst_gap = worst_gap.max(max_u - hi).max(lo - min_u);
        }
        pass &= worst_gap <= 1e-9;
        detail.push_str(&format!("n={n} worst overshoot={worst_gap:.2e} "));
    }
    report(6, "comparison-envelope", pass, detail.trim());
}

#[test]
fn criterion_07_domain_exhaustion() {
    let (c, grid, data, _) = tailed_bump_1000();
    let cfg = fixed_dt_cfg(0.5, 0.005);
    let runs = exhaustion_solve(&grid, &c, &data, &cfg, &[250.0, 500.0, 1000.0]).unwrap();
    let full = evolve(&grid, &c, &data, &cfg).unwrap();
    let mut dists = Vec::new();
    let mut max_ratio = 0.0f64;
    for run in &runs {
        let half_r = run.m_k / 2.0;
        let mut d = 0.0f64;
        let recs = run.trajectory.snapshots.len().min(full.snapshots.len());
        for j in 0..recs {
            for (i, &r) in run.grid.nodes().iter().enumerate() {
                if r > half_r {
                    break;
                }
                d = d.max((run.trajectory.snapshots[j][i] - full.snapshots[j][i]).abs());
            }
        }
        dists.push(d);
        max_ratio = max_ratio.max(run.max_time_ratio);
    }
    let decreasing = dists.windows(2).all(|w| w[1] <= 1.1 * w[0] + 1e-13);
    let ratio_ok = max_ratio <= 1.0 + 1e-10;
    report(
        7,
        "domain-exhaustion",
        decreasing && ratio_ok,
        &format!("half-ball distances={} time ratio={max_ratio:.12}", fmt_vec(&dists)),
    );
}

#[test]
fn criterion_08_far_field_decay() {
    let (c, grid, data, _) = tailed_bump_1000();
    let cfg = fixed_dt_cfg(0.1, 0.002);
    let traj = evolve(&grid, &c, &data, &cfg).unwrap();
    let uf = traj.snapshots.last().unwrap();
    let slope = diagnostics::decay_exponent_fit(&grid, uf, 10.0, 100.0).unwrap().unwrap();
    let slope_ok = slope <= -2.8;

    // the sup-weighted deviation must stay carried by bounded radii at every
    // record: full-window sup within 10% of the half-window sup
    let n = c.n as f64;
    let (r_lo, r_half, r_full) =
        (grid.r_max() / 100.0, grid.r_max() / 4.0, grid.r_max() / 2.0);
    let mut worst_ratio = 0.0f64;
    for u in &traj.snapshots {
        let mut full = 0.0f64;
        let mut half = 0.0f64;
        for (i, &r) in grid.nodes().iter().enumerate() {
            let w = r.powf(n) * (1.0 - u[i]).abs();
            if r >= r_lo && r <= r_full {
                full = full.max(w);
            }
            if r >= r_lo && r <= r_half {
                half = half.max(w);
            }
        }
        if full > 1e-13 {
            worst_ratio = worst_ratio.max(full / half);
        }
    }
    let window_ok = worst_ratio <= 1.1;
    report(
        8,
        "far-field-decay",
        slope_ok && window_ok,
        &format!("fitted exponent={slope:.3}, window saturation={worst_ratio:.4}"),
    );
}

#[test]
fn criterion_09_weighted_norm_identities() {
    let c = Constants::new(3).unwrap();
    let mut pass = true;
    let mut worst_slack = f64::INFINITY;

    // deterministic corpus entry: exact-equality configuration
    let radii: Vec<f64> = (0..200).map(|i| 1.0 * 1.0116f64.powi(i)).collect();
    let values: Vec<f64> = radii.iter().map(|&r| r.powi(-2)).collect();
    let f = SpaceTimeField::radial(radii.clone(), values).unwrap();
    let (lhs, rhs) = holder_product_check(&f, -1.0, -1.0, 1.0, 2.0, 2.0, &c).unwrap();
    pass &= lhs <= rhs * (1.0 + 1e-12);
    worst_slack = worst_slack.min(rhs / lhs);

    // 100 seeded random positive fields with mixed weights and exponents
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..radii.len()).map(|_| rng.gen_range(0.01..5.0)).collect();
        let rf = SpaceTimeField::radial(radii.clone(), vals).unwrap();
        let (b1, b2) = (rng.gen_range(-1.5..0.5), rng.gen_range(-1.5..0.5));
        let (p, q, s) = if seed % 2 == 0 { (1.0, 2.0, 2.0) } else { (2.0, 4.0, 4.0) };
        let (lhs, rhs) = holder_product_check(&rf, b1, b2, p, q, s, &c).unwrap();
        pass &= lhs <= rhs * (1.0 + 1e-12);
        worst_slack = worst_slack.min(rhs / lhs);
    }

    // rescaling identities at R = 2 on matched samples
    let unit_radii: Vec<f64> = (0..60).map(|i| 0.25 * 1.05f64.powi(i)).collect();
    let times = vec![0.0, 0.1, 0.25, 0.5];
    let r_scale = 2.0;
    let mut worst_gap = 0.0f64;
    for (variant, q, time_factor) in [
        (Variant::Elliptic, f64::INFINITY, 1.0),
        (Variant::ParabolicTilde, 2.0, 1.0),
        (Variant::ParabolicPlain, 2.0, r_scale * r_scale),
        (Variant::ParabolicPlain, f64::INFINITY, r_scale * r_scale),
    ] {
        let v = |r: f64, t: f64| r.powf(-1.5) * (-t).exp();
        let unit_values: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| unit_radii.iter().map(|&r| v(r_scale * r, time_factor * t)).collect())
            .collect();
        let scaled_radii: Vec<f64> = unit_radii.iter().map(|&r| r_scale * r).collect();
        let scaled_times: Vec<f64> = times.iter().map(|&t| time_factor * t).collect();
        let scaled_values: Vec<Vec<f64>> = scaled_times
            .iter()
            .map(|&t| scaled_radii.iter().map(|&r| v(r, t)).collect())
            .collect();
        let unit = SpaceTimeField::new(unit_radii.clone(), times.clone(), unit_values).unwrap();
        let scaled = SpaceTimeField::new(scaled_radii, scaled_times, scaled_values).unwrap();
        let spec = WeightSpec { beta: -1.5, q, k: 1, alpha: 0.5, variant };
        let chk = scaling_identity_check(&unit, &scaled, r_scale, &spec, &c).unwrap();
        pass &= chk.relative_gap <= 1e-10;
        worst_gap = worst_gap.max(chk.relative_gap);
        if variant == Variant::ParabolicTilde {
            let chk = scaling_identity_check_holder(&unit, &scaled, r_scale, &spec, &c).unwrap();
            pass &= chk.relative_gap <= 1e-10;
            worst_gap = worst_gap.max(chk.relative_gap);
        }
    }
    report(
        9,
        "weighted-norm-identities",
        pass,
        &format!("min product slack={worst_slack:.12}, max scaling gap={worst_gap:.2e}"),
    );
}

#[test]
fn criterion_10_kernel_cross_checks() {
    let c = Constants::new(3).unwrap();
    let mut cov = Vec::new();
    for &(h0, s, _) in &LEVELS {
        let grid = RadialGrid::geometric(h0, s, 500.0).unwrap();
        let data = build_bump(&grid, &c, 0.1, 2.0, 1.0, 0.0).unwrap();
        let f: Vec<f64> =
            grid.nodes().iter().map(|&r| 1.0 + 0.3 * (-0.05 * r * r).exp()).collect();
        let a = conformal_laplacian(&grid, &c, &f, &data.w0, data.w0_origin_flux).unwrap();
        let b = conformal_laplacian_direct(&grid, &c, &f, &data.w0, data.w0_origin_flux).unwrap();
        let mut d = 0.0f64;
        for i in 1..grid.len() - 2 {
            d = d.max((a[i] - b[i]).abs());
        }
        cov.push(d);
    }
    let orders = pair_orders(&cov);
    let cov_ok = orders.iter().all(|&o| o >= 1.9);

    let (c, grid, data, _) = tailed_bump_1000();
    let ladder = mass_ladder(&grid, &c, &data, &default_mass_ladder(grid.r_max())).unwrap();
    let m1 = adm_mass_extrapolate(&ladder).unwrap().value;
    let m2 = mass_coefficient_fit(&grid, &c, &data, grid.r_max() / 10.0, grid.r_max()).unwrap();
    let surface_ladder: Vec<(f64, f64)> = ladder
        .iter()
        .map(|&(r, _)| (r, adm_mass_surface(&grid, &c, &data, r).unwrap()))
        .collect();
    let m3 = adm_mass_extrapolate(&surface_ladder).unwrap().value;
    let rel = |a: f64, b: f64| ((a - b) / a.abs().max(1e-12)).abs();
    let gap = rel(m1, m2).max(rel(m1, m3)).max(rel(m2, m3));
    let routes_ok = gap <= 1e-4;
    report(
        10,
        "kernel-cross-checks",
        cov_ok && routes_ok,
        &format!("covariance orders={orders:.2?}, mass routes gap={gap:.2e}"),
    );
}
