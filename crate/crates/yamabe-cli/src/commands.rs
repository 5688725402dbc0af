//! The four subcommands. Each writes its CSV outputs plus a manifest into
//! the output directory; the returned code follows the exit contract
//! (0 pass, 1 usage, 2 hypothesis violation, 3 blow-up).

use serde_json::json;
use std::path::Path;
use yamabe_core::constants::Constants;
use yamabe_core::diagnostics::{
    self, positivity_monitor, trajectory_records, DiagnosticsRecord,
};
use yamabe_core::error::Error as CoreError;
use yamabe_core::exec;
use yamabe_core::flow::{evolve, exhaustion_solve, max_principle_envelope, Outcome, Trajectory};
use yamabe_core::geometry::scalar_curvature;
use yamabe_core::grid::RadialGrid;
use yamabe_core::initial::{verify_nonneg_scalar, ConformalData};
use yamabe_core::norms::{self, SpaceTimeField};

use crate::config::{NormsConfig, RunConfig};
use crate::report::{self, atomic_write, fmt, Manifest, TrajectorySlice};
use crate::Failure;

const ENVELOPE_SLACK: f64 = 1e-9;
const MONOTONE_SLACK: f64 = 1e-9;
const FLOOR: f64 = 1e-8;

fn core_usage(e: CoreError) -> Failure {
    Failure::Usage(e.to_string())
}

struct Prepared {
    c: Constants,
    grid: RadialGrid,
    data: ConformalData,
    sup_r0: f64,
    base_scalar_pass: bool,
    base_min_r: f64,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, Failure> {
    let c = cfg.constants()?;
    let grid = cfg.build_grid()?;
    let data = cfg.build_data(&grid, &c)?;
    cfg.flow_config().validate().map_err(|e| Failure::Usage(format!("flow: {e}")))?;
    let scalar = verify_nonneg_scalar(&data, &grid, &c).map_err(core_usage)?;
    Ok(Prepared {
        c,
        grid,
        data,
        sup_r0: scalar.max_abs_r,
        base_scalar_pass: scalar.pass,
        base_min_r: scalar.min_r,
    })
}

fn curvature_fields(
    p: &Prepared,
    snapshots: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, Failure> {
    exec::try_map(&(0..snapshots.len()).collect::<Vec<_>>(), |&j| {
        let u = &snapshots[j];
        let big_u: Vec<f64> = u.iter().zip(&p.data.w0).map(|(&ui, &wi)| ui * wi).collect();
        scalar_curvature(&p.grid, &p.c, &big_u, u[0] * p.data.w0_origin_flux)
    })
    .map_err(core_usage)
}

/// Envelope and monotonicity checks shared by run and exhaustion.
fn envelope_ok(records: &[DiagnosticsRecord]) -> bool {
    records.iter().all(|rec| {
        rec.max_u <= rec.envelope_hi + ENVELOPE_SLACK
            && rec.min_u >= rec.envelope_lo - ENVELOPE_SLACK
    })
}

fn eh_monotone_ok(records: &[DiagnosticsRecord]) -> bool {
    records.windows(2).all(|w| w[1].eh_functional <= w[0].eh_functional + MONOTONE_SLACK)
}

pub fn cmd_run(config_path: &Path, out_dir: &Path) -> Result<u8, Failure> {
    let cfg = RunConfig::load(config_path)?;
    let mut manifest = Manifest::new("run", serde_json::to_value(&cfg).unwrap());
    let p = prepare(&cfg)?;
    let flow_cfg = cfg.flow_config();
    let traj = evolve(&p.grid, &p.c, &p.data, &flow_cfg).map_err(core_usage)?;
    let records =
        trajectory_records(&p.grid, &p.c, &p.data, &traj, p.sup_r0).map_err(core_usage)?;
    let r_fields = curvature_fields(&p, &traj.snapshots)?;

    let t_geom = traj.t_geom(&p.c);
    let big_u_fields: Vec<Vec<f64>> = traj
        .snapshots
        .iter()
        .map(|u| u.iter().zip(&p.data.w0).map(|(&ui, &wi)| ui * wi).collect())
        .collect();
    let slices: Vec<TrajectorySlice> = (0..traj.snapshots.len())
        .map(|j| TrajectorySlice {
            t_u: traj.times_u[j],
            t_geom: t_geom[j],
            u: &traj.snapshots[j],
            big_u: &big_u_fields[j],
            r_scalar: &r_fields[j],
        })
        .collect();

    let traj_path = out_dir.join("trajectory.csv");
    let diag_path = out_dir.join("diagnostics.csv");
    atomic_write(&traj_path, &report::trajectory_csv(p.grid.nodes(), &slices))?;
    atomic_write(&diag_path, &report::diagnostics_csv(&records))?;
    manifest.output(&traj_path);
    manifest.output(&diag_path);

    let positivity = positivity_monitor(&r_fields).map_err(core_usage)?;
    let env_pass = envelope_ok(&records);
    let eh_pass = eh_monotone_ok(&records);
    manifest.check(
        "base_scalar_nonneg",
        p.base_scalar_pass,
        json!({ "min_R_g0": p.base_min_r, "sup_R_g0": p.sup_r0 }),
    );
    manifest.check(
        "scalar_positivity",
        positivity.pass,
        json!({ "min_R": positivity.min_r, "max_R": positivity.max_r }),
    );
    manifest.check("max_principle_envelope", env_pass, json!({ "slack": ENVELOPE_SLACK }));
    manifest.check("eh_non_increasing", eh_pass, json!({ "slack": MONOTONE_SLACK }));

    if cfg.flow.t_end > 0.0 && traj.snapshots.len() >= 2 {
        let half = p.grid.r_max() / 2.0;
        match diagnostics::gradient_estimate_monitor(
            &p.grid,
            &p.c,
            &p.data,
            &traj.snapshots,
            &t_geom,
            half,
            cfg.cprime,
        ) {
            Ok(gr) => manifest.resolve(
                "gradient_monitor",
                json!({
                    "cprime": gr.cprime,
                    "k_sup": gr.k_sup,
                    "max_ratio": gr.max_ratio,
                    "eq_residual_max": gr.eq_residual_max,
                    "asserted": false,
                }),
            ),
            Err(e) => manifest.resolve("gradient_monitor", json!({ "error": e.to_string() })),
        }
    }

    manifest.resolve("grid_nodes", json!(p.grid.len()));
    manifest.resolve(
        "constants",
        json!({ "a": p.c.a, "c_n": p.c.c_n, "exponent": p.c.exponent, "omega": p.c.omega }),
    );
    manifest.resolve(
        "steps",
        json!({ "accepted": traj.accepted_steps, "rejected": traj.rejected_steps }),
    );

    let blow_up = matches!(traj.outcome, Outcome::BlowUp { .. });
    if let Outcome::BlowUp { t_u, min_u } = traj.outcome {
        manifest.check("completion", false, json!({ "blow_up_t_u": t_u, "min_u": min_u }));
    } else {
        manifest.check("completion", true, json!({}));
    }

    let code = if blow_up {
        3
    } else if p.base_scalar_pass && positivity.pass && env_pass && eh_pass {
        0
    } else {
        2
    };
    manifest.write(out_dir, code)?;
    Ok(code)
}

/// Three-point Lagrange interpolation on the nodes nearest to the probe.
fn quad_interp(nodes: &[f64], values: &[f64], r: f64) -> f64 {
    let m = nodes.len();
    let k = nodes.partition_point(|&x| x < r).clamp(1, m - 2);
    let (x0, x1, x2) = (nodes[k - 1], nodes[k], nodes[k + 1]);
    let (y0, y1, y2) = (values[k - 1], values[k], values[k + 1]);
    let l0 = (r - x1) * (r - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (r - x0) * (r - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (r - x0) * (r - x1) / ((x2 - x0) * (x2 - x1));
    y0 * l0 + y1 * l1 + y2 * l2
}

struct LevelResult {
    grid: RadialGrid,
    final_u: Vec<f64>,
    scalar_res: f64,
    balance_res: f64,
    mass_drift: f64,
}

pub fn cmd_convergence(config_path: &Path, levels: u32, out_dir: &Path) -> Result<u8, Failure> {
    if !(2..=5).contains(&levels) {
        return Err(Failure::Usage(format!("levels must be in [2, 5], got {levels}")));
    }
    let cfg = RunConfig::load(config_path)?;
    let mut manifest = Manifest::new("convergence", serde_json::to_value(&cfg).unwrap());
    manifest.resolve("levels", json!(levels));
    manifest.resolve(
        "time_step_policy",
        json!("fixed dt = flow.dt_init / 2^level; dt_min and dt_max overridden to match"),
    );
    cfg.constants()?;

    let run_level = |lvl: u32| -> Result<LevelResult, Failure> {
        let scale = 2f64.powi(lvl as i32);
        let mut level_cfg = cfg.clone();
        level_cfg.grid.h0 = cfg.grid.h0 / scale;
        level_cfg.grid.stretch = 1.0 + (cfg.grid.stretch - 1.0) / scale;
        let dt = cfg.flow.dt_init / scale;
        level_cfg.flow.dt_init = dt;
        level_cfg.flow.dt_min = dt;
        level_cfg.flow.dt_max = dt;
        let p = prepare(&level_cfg)?;
        let traj =
            evolve(&p.grid, &p.c, &p.data, &level_cfg.flow_config()).map_err(core_usage)?;
        if let Outcome::BlowUp { t_u, min_u } = traj.outcome {
            return Err(Failure::BlowUp(format!(
                "level {lvl} blew up at t_u = {t_u} with min u = {min_u}"
            )));
        }
        let records =
            trajectory_records(&p.grid, &p.c, &p.data, &traj, p.sup_r0).map_err(core_usage)?;
        // Residuals are sampled at the record nearest t_end/2: the centered
        // windows at the endpoints touch the initial transient and the final
        // record, which would mask the refinement order.
        let half_t = traj.times_u.last().unwrap() / 2.0;
        let mid = traj
            .times_u
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - half_t).abs().total_cmp(&(b.1 - half_t).abs()))
            .map(|(j, _)| j)
            .unwrap()
            .clamp(1, records.len().saturating_sub(2).max(1));
        let scalar_res = records[mid].scalar_residual_sup.abs();
        let balance_res = records[mid].balance_residual.abs();
        let m0 = records[0].mass_extrapolated;
        let mass_drift = records
            .iter()
            .fold(0.0f64, |a, r| a.max((r.mass_extrapolated - m0).abs()))
            / m0.abs().max(1e-30);
        Ok(LevelResult {
            final_u: traj.snapshots.last().unwrap().clone(),
            grid: p.grid,
            scalar_res,
            balance_res,
            mass_drift,
        })
    };
    let results: Vec<LevelResult> =
        (0..levels).map(run_level).collect::<Result<_, _>>()?;

    // Self-difference of final states, probed on the coarsest interior nodes.
    let probes: Vec<f64> = results[0]
        .grid
        .nodes()
        .iter()
        .copied()
        .filter(|&r| r <= cfg.grid.r_max / 2.0)
        .collect();
    let final_diffs: Vec<f64> = (1..results.len())
        .map(|i| {
            probes
                .iter()
                .map(|&r| {
                    let a = quad_interp(results[i - 1].grid.nodes(), &results[i - 1].final_u, r);
                    let b = quad_interp(results[i].grid.nodes(), &results[i].final_u, r);
                    (a - b).abs()
                })
                .fold(0.0f64, f64::max)
        })
        .collect();

    let order_cell = |coarse: f64, fine: f64| -> String {
        if coarse.abs() <= FLOOR && fine.abs() <= FLOOR {
            "exact".into()
        } else if fine.abs() <= 1e-300 {
            "inf".into()
        } else {
            fmt((coarse / fine).log2())
        }
    };

    let mut csv = String::from("quantity,level,value,order\n");
    for (i, &d) in final_diffs.iter().enumerate() {
        let order = if i > 0 {
            order_cell(final_diffs[i - 1], d)
        } else if d.abs() <= FLOOR {
            "exact".into()
        } else {
            "nan".into()
        };
        csv.push_str(&format!("final_state_diff,{},{},{}\n", i + 1, fmt(d), order));
    }
    for (name, pick) in [
        ("scalar_res", &(|r: &LevelResult| r.scalar_res) as &dyn Fn(&LevelResult) -> f64),
        ("balance_res", &|r: &LevelResult| r.balance_res),
        ("mass_drift", &|r: &LevelResult| r.mass_drift),
    ] {
        for (i, res) in results.iter().enumerate() {
            let v = pick(res);
            let order = if i == 0 {
                "nan".into()
            } else {
                order_cell(pick(&results[i - 1]), v)
            };
            csv.push_str(&format!("{name},{i},{},{}\n", fmt(v), order));
        }
    }
    let conv_path = out_dir.join("convergence.csv");
    atomic_write(&conv_path, &csv)?;
    manifest.output(&conv_path);
    manifest.write(out_dir, 0)?;
    Ok(0)
}

pub fn cmd_compare_exhaustion(
    config_path: &Path,
    radii: &[f64],
    out_dir: &Path,
) -> Result<u8, Failure> {
    if radii.len() < 2 {
        return Err(Failure::Usage(format!(
            "compare-exhaustion needs at least 2 radii, got {}",
            radii.len()
        )));
    }
    let cfg = RunConfig::load(config_path)?;
    let mut manifest = Manifest::new("compare-exhaustion", serde_json::to_value(&cfg).unwrap());
    manifest.resolve("radii", json!(radii));
    let p = prepare(&cfg)?;
    let flow_cfg = cfg.flow_config();
    let full = evolve(&p.grid, &p.c, &p.data, &flow_cfg).map_err(core_usage)?;
    if let Outcome::BlowUp { t_u, min_u } = full.outcome {
        return Err(Failure::BlowUp(format!(
            "full-domain run blew up at t_u = {t_u} with min u = {min_u}"
        )));
    }
    let runs =
        exhaustion_solve(&p.grid, &p.c, &p.data, &flow_cfg, radii).map_err(core_usage)?;

    let dist_to_full = |run_grid: &RadialGrid, traj: &Trajectory, m_k: f64| -> f64 {
        let half = m_k / 2.0;
        let n_common = run_grid.nodes().iter().take_while(|&&r| r <= half).count();
        let records = traj.snapshots.len().min(full.snapshots.len());
        let mut d = 0.0f64;
        for j in 0..records {
            for i in 0..n_common {
                d = d.max((traj.snapshots[j][i] - full.snapshots[j][i]).abs());
            }
        }
        d
    };

    let mut csv = String::from("m_k,dist_to_prev,dist_to_full,max_time_ratio,env_ok\n");
    let mut dists = Vec::with_capacity(runs.len());
    let mut all_env_ok = true;
    for run in &runs {
        let d_full = dist_to_full(&run.grid, &run.trajectory, run.m_k);
        let env_ok = run.trajectory.times_u.iter().zip(&run.trajectory.snapshots).all(
            |(&t_u, snap)| {
                let (lo, hi) = max_principle_envelope(t_u, p.sup_r0, &p.c);
                snap.iter()
                    .all(|&v| v <= hi + ENVELOPE_SLACK && v >= lo - ENVELOPE_SLACK)
            },
        );
        all_env_ok &= env_ok;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(run.m_k),
            run.dist_to_prev.map_or("nan".into(), fmt),
            fmt(d_full),
            fmt(run.max_time_ratio),
            u8::from(env_ok),
        ));
        dists.push(d_full);
    }
    let ex_path = out_dir.join("exhaustion.csv");
    atomic_write(&ex_path, &csv)?;
    manifest.output(&ex_path);

    // Decrease with 10% slack plus an absolute floor for runs already exact.
    let decreasing = dists.windows(2).all(|w| w[1] <= 1.1 * w[0] + 1e-13);
    let ratio_ok = runs.iter().all(|r| r.max_time_ratio <= 1.0 + 1e-10);
    manifest.check("distances_decreasing", decreasing, json!(dists));
    manifest.check("envelopes_hold", all_env_ok, json!({ "slack": ENVELOPE_SLACK }));
    manifest.check(
        "domain_ratio_bound",
        ratio_ok,
        json!(runs.iter().map(|r| r.max_time_ratio).collect::<Vec<_>>()),
    );
    manifest.resolve("base_scalar_nonneg", json!(p.base_scalar_pass));

    let code = if decreasing && all_env_ok && ratio_ok && p.base_scalar_pass { 0 } else { 2 };
    manifest.write(out_dir, code)?;
    Ok(code)
}

fn parse_trajectory(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read trajectory {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == report::TRAJECTORY_HEADER => {}
        other => {
            return Err(Failure::Usage(format!(
                "trajectory {}: expected header `{}`, got {:?}",
                path.display(),
                report::TRAJECTORY_HEADER,
                other.unwrap_or("<empty>"),
            )))
        }
    }
    let mut times: Vec<f64> = Vec::new();
    let mut radii: Vec<f64> = Vec::new();
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    let mut block_radii: Vec<f64> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(Failure::Usage(format!(
                "trajectory {} line {}: expected 6 columns, got {}",
                path.display(),
                lineno + 2,
                cols.len()
            )));
        }
        let num = |j: usize| -> Result<f64, Failure> {
            cols[j].parse::<f64>().map_err(|_| {
                Failure::Usage(format!(
                    "trajectory {} line {}: bad number `{}`",
                    path.display(),
                    lineno + 2,
                    cols[j]
                ))
            })
        };
        let (t_u, r, u) = (num(0)?, num(2)?, num(3)?);
        if times.last() != Some(&t_u) {
            if !block_radii.is_empty() {
                if radii.is_empty() {
                    radii = std::mem::take(&mut block_radii);
                } else if block_radii != radii {
                    return Err(Failure::Usage(format!(
                        "trajectory {}: time blocks use different radial grids",
                        path.display()
                    )));
                } else {
                    block_radii.clear();
                }
            }
            times.push(t_u);
            blocks.push(Vec::new());
        }
        block_radii.push(r);
        blocks.last_mut().unwrap().push(u);
    }
    if !block_radii.is_empty() {
        if radii.is_empty() {
            radii = std::mem::take(&mut block_radii);
        } else if block_radii != radii {
            return Err(Failure::Usage(format!(
                "trajectory {}: time blocks use different radial grids",
                path.display()
            )));
        }
    }
    if radii.is_empty() || blocks.iter().any(|b| b.len() != radii.len()) {
        return Err(Failure::Usage(format!(
            "trajectory {}: empty or ragged time blocks",
            path.display()
        )));
    }
    Ok((times, radii, blocks))
}

pub fn cmd_norms(
    trajectory_path: &Path,
    specs_path: &Path,
    dimension: u32,
    out_dir: &Path,
) -> Result<u8, Failure> {
    let specs = NormsConfig::load(specs_path)?;
    let c = Constants::new(dimension)
        .map_err(|e| Failure::Usage(format!("dimension: {e}")))?;
    let (times, radii, u_blocks) = parse_trajectory(trajectory_path)?;
    let v_blocks: Vec<Vec<f64>> = u_blocks
        .iter()
        .map(|b| b.iter().map(|&u| 1.0 - u).collect())
        .collect();
    let field = SpaceTimeField::new(radii.clone(), times.clone(), v_blocks.clone())
        .map_err(core_usage)?;

    let mut manifest = Manifest::new("norms", serde_json::to_value(&specs).unwrap());
    manifest.resolve("trajectory", json!(trajectory_path.display().to_string()));
    manifest.resolve("dimension", json!(dimension));
    manifest.resolve("field", json!("v = 1 - u"));

    let mut csv = String::from("variant,beta,q,k,alpha,value,sampling_density\n");
    for spec in &specs.specs {
        let ws = spec.weight_spec();
        ws.validate().map_err(|e| Failure::Usage(format!("norm spec: {e}")))?;
        // Elliptic specs evaluate per time slice; report the sup over slices.
        let (value, density) = if matches!(ws.variant, norms::Variant::Elliptic) {
            let mut sup = 0.0f64;
            let mut density = 0usize;
            for (j, t) in times.iter().enumerate() {
                let slice = SpaceTimeField::new(
                    radii.clone(),
                    vec![*t],
                    vec![v_blocks[j].clone()],
                )
                .map_err(core_usage)?;
                if ws.k == 0 {
                    sup = sup.max(norms::lq_beta_norm(&slice, &ws, &c).map_err(core_usage)?);
                } else {
                    let rep = norms::holder_norm(&slice, &ws, &c).map_err(core_usage)?;
                    sup = sup.max(rep.value);
                    density = density.max(rep.sampling_density);
                }
            }
            (sup, density)
        } else if ws.k == 0 {
            (norms::lq_beta_norm(&field, &ws, &c).map_err(core_usage)?, 0)
        } else {
            let rep = norms::holder_norm(&field, &ws, &c).map_err(core_usage)?;
            (rep.value, rep.sampling_density)
        };
        let q_cell = if ws.q.is_infinite() { "inf".into() } else { fmt(ws.q) };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            spec.variant_label(),
            fmt(ws.beta),
            q_cell,
            ws.k,
            fmt(ws.alpha),
            fmt(value),
            density,
        ));
    }
    let norms_path = out_dir.join("norms.csv");
    atomic_write(&norms_path, &csv)?;
    manifest.output(&norms_path);

    let r_max = *radii.last().unwrap();
    let (r_lo, r_hi) = (r_max / 100.0, r_max / 2.0);
    manifest.resolve("decay_window", json!([r_lo, r_hi]));
    let mut decay = String::from("t_u,decay_exp\n");
    for (j, &t) in times.iter().enumerate() {
        let exp = norms::decay_exponent_fit(&radii, &v_blocks[j], r_lo, r_hi)
            .ok()
            .flatten()
            .unwrap_or(f64::NAN);
        decay.push_str(&format!("{},{}\n", fmt(t), fmt(exp)));
    }
    let decay_path = out_dir.join("decay.csv");
    atomic_write(&decay_path, &decay)?;
    manifest.output(&decay_path);
    manifest.write(out_dir, 0)?;
    Ok(0)
}
