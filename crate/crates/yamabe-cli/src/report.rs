//! Output plumbing: atomic file writes, pinned CSV columns, run manifest.

use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use std::time::SystemTime;
use yamabe_core::diagnostics::DiagnosticsRecord;

use crate::Failure;

/// Write via a temporary file in the same directory, then rename into place.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    std::fs::write(&tmp, contents)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| Failure::Usage(format!("cannot rename to {}: {e}", path.display())))?;
    Ok(())
}

/// Shortest round-trip decimal; NaN spelled lowercase for CSV stability.
pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

pub const DIAGNOSTICS_HEADER: &str = "t_u,t_geom,mass_r1,mass_r2,mass_r3,mass_r4,mass_r5,\
mass_extrap,eh,r2,min_R,scalar_res,balance_res,decay_exp,env_lo,env_hi,min_u,max_u";

pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for rec in records {
        let mut cols = vec![fmt(rec.t_u), fmt(rec.t_geom)];
        for k in 0..5 {
            cols.push(fmt(rec.mass_ladder.get(k).map_or(f64::NAN, |&(_, m)| m)));
        }
        cols.extend([
            fmt(rec.mass_extrapolated),
            fmt(rec.eh_functional),
            fmt(rec.r2_integral),
            fmt(rec.min_r),
            fmt(rec.scalar_residual_sup),
            fmt(rec.balance_residual),
            fmt(rec.decay_exponent),
            fmt(rec.envelope_lo),
            fmt(rec.envelope_hi),
            fmt(rec.min_u),
            fmt(rec.max_u),
        ]);
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub const TRAJECTORY_HEADER: &str = "t_u,t_geom,r,u,U,R";

pub struct TrajectorySlice<'a> {
    pub t_u: f64,
    pub t_geom: f64,
    pub u: &'a [f64],
    pub big_u: &'a [f64],
    pub r_scalar: &'a [f64],
}

pub fn trajectory_csv(radii: &[f64], slices: &[TrajectorySlice]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for s in slices {
        for (i, &r) in radii.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt(s.t_u),
                fmt(s.t_geom),
                fmt(r),
                fmt(s.u[i]),
                fmt(s.big_u[i]),
                fmt(s.r_scalar[i]),
            ));
        }
    }
    out
}

pub struct Manifest {
    pub command: String,
    pub config_echo: Value,
    pub resolved: Map<String, Value>,
    pub outputs: Vec<PathBuf>,
    pub checks: Map<String, Value>,
    pub started: SystemTime,
}

impl Manifest {
    pub fn new(command: &str, config_echo: Value) -> Self {
        Manifest {
            command: command.into(),
            config_echo,
            resolved: Map::new(),
            outputs: Vec::new(),
            checks: Map::new(),
            started: SystemTime::now(),
        }
    }

    pub fn resolve(&mut self, key: &str, value: Value) {
        self.resolved.insert(key.into(), value);
    }

    pub fn check(&mut self, key: &str, pass: bool, detail: Value) {
        self.checks.insert(key.into(), json!({ "pass": pass, "detail": detail }));
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write(&self, dir: &Path, exit_code: u8) -> Result<(), Failure> {
        let epoch = |t: SystemTime| {
            t.duration_since(SystemTime::UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
        };
        let doc = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config_echo,
            "resolved": Value::Object(self.resolved.clone()),
            "seeds": [],
            "outputs": self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "checks": Value::Object(self.checks.clone()),
            "wall_time_start": epoch(self.started),
            "wall_time_end": epoch(SystemTime::now()),
            "exit_code": exit_code,
        });
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| Failure::Usage(format!("manifest serialization: {e}")))?;
        atomic_write(&dir.join("manifest.json"), &(text + "\n"))
    }
}
