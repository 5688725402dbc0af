//! Constructors and validation for asymptotically flat base factors w0.

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::geometry::{scalar_curvature, volume_element};
use crate::grid::RadialGrid;
use crate::linalg::solve_dense;
use std::path::Path;

/// Blend-shape parameter of the capped-harmonic bump: the cap constant is
/// c0 = b^{2-n} (1 + CAP_MARGIN * (n-2)(b-a)/b). Values >= 0.6 keep the
/// quintic blend superharmonic across the supported dimensions.
const CAP_MARGIN: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDataSpec {
    Schwarzschild { mass: f64 },
    Bump { amplitude: f64, r_center: f64, width: f64, tail: f64 },
    Table { path: String },
}

/// Conformal factors of the evolving metric g = (u w0)^{4/(n-2)} delta.
///
/// `w0_origin_flux` is lim_{r->0} r^{n-1} w0'(r): zero for regular data,
/// mu (2-n) for the Schwarzschild profile w0 = 1 + mu r^{2-n}. Carrying the
/// analytic flux keeps the flux-form Laplacian exact on those profiles.
#[derive(Debug, Clone)]
pub struct ConformalData {
    pub w0: Vec<f64>,
    pub u: Vec<f64>,
    pub big_u: Vec<f64>,
    pub w0_origin_flux: f64,
}

impl ConformalData {
    fn from_w0(w0: Vec<f64>, w0_origin_flux: f64) -> Result<Self> {
        if w0.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain("base factor must be positive and finite".into()));
        }
        let u = vec![1.0; w0.len()];
        let big_u = w0.clone();
        Ok(ConformalData { w0, u, big_u, w0_origin_flux })
    }

    /// Replaces the flow factor and refreshes the cached product U = u w0.
    pub fn set_u(&mut self, u: Vec<f64>) {
        assert_eq!(u.len(), self.w0.len());
        self.big_u = u.iter().zip(&self.w0).map(|(&ui, &wi)| ui * wi).collect();
        self.u = u;
    }

    /// Origin flux of U = u w0 (u is regular, so only w0 contributes).
    pub fn big_u_origin_flux(&self) -> f64 {
        self.u[0] * self.w0_origin_flux
    }
}

/// Scalar-flat datum w0 = 1 + (mass/(n-1)) r^{2-n}.
pub fn build_schwarzschild(grid: &RadialGrid, c: &Constants, mass: f64) -> Result<ConformalData> {
    if mass < 0.0 {
        return Err(Error::Domain(format!(
            "schwarzschild mass must be nonnegative, got {mass}"
        )));
    }
    let n = c.n as f64;
    let mu = mass / (n - 1.0);
    let w0 = grid
        .nodes()
        .iter()
        .map(|&r| 1.0 + mu * r.powf(2.0 - n))
        .collect();
    ConformalData::from_w0(w0, mu * (2.0 - n))
}

/// Coefficients (a0..a5) of the quintic blend q(r) on [ra, rb] matching
/// q = c0 (C^2 flat) at ra and q = r^{2-n} (C^2) at rb.
fn quintic_blend(ra: f64, rb: f64, n: f64, c0: f64) -> Result<Vec<f64>> {
    let row = |r: f64, der: u32| -> Vec<f64> {
        (0..6u32)
            .map(|k| {
                if k < der {
                    0.0
                } else {
                    let fall: f64 = (0..der).map(|j| (k - j) as f64).product();
                    fall * r.powi((k - der) as i32)
                }
            })
            .collect()
    };
    let a = vec![
        row(ra, 0),
        row(ra, 1),
        row(ra, 2),
        row(rb, 0),
        row(rb, 1),
        row(rb, 2),
    ];
    let b = vec![
        c0,
        0.0,
        0.0,
        rb.powf(2.0 - n),
        (2.0 - n) * rb.powf(1.0 - n),
        (2.0 - n) * (1.0 - n) * rb.powf(-n),
    ];
    solve_dense(a, b)
}

fn eval_poly(coef: &[f64], r: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &ck| acc * r + ck)
}

fn eval_poly_deriv(coef: &[f64], r: f64, der: u32) -> f64 {
    let mut acc = 0.0;
    for k in (der as usize..coef.len()).rev() {
        let fall: f64 = (0..der).map(|j| (k as u32 - j) as f64).product();
        acc = acc * r + coef[k] * fall;
    }
    acc * 1.0
}

/// Superharmonic bump datum w0 = 1 + amplitude * q(r) (+ optional algebraic
/// tail): q equals a constant cap on [0, r_center-width], a C^2 quintic
/// blend on the cap interval, and exactly r^{2-n} beyond, so D0 q <= 0 and
/// the scalar curvature of w0 is nonnegative with compact support. The
/// optional `tail` adds tail * (r_center^2 + r^2)^{(2-n)/2}, also
/// superharmonic, giving the datum an algebraic curvature tail.
pub fn build_bump(
    grid: &RadialGrid,
    c: &Constants,
    amplitude: f64,
    r_center: f64,
    width: f64,
    tail: f64,
) -> Result<ConformalData> {
    if !(amplitude >= 0.0) || !(r_center > 0.0) || !(width > 0.0) || !(tail >= 0.0) {
        return Err(Error::Domain(format!(
            "bump parameters must be positive (amplitude/tail nonnegative), got \
             amplitude = {amplitude}, r_center = {r_center}, width = {width}, tail = {tail}"
        )));
    }
    if width >= r_center {
        return Err(Error::Domain(format!(
            "bump width {width} must be smaller than r_center {r_center}"
        )));
    }
    let n = c.n as f64;
    let (ra, rb) = (r_center - width, r_center + width);
    let c0 = rb.powf(2.0 - n) * (1.0 + CAP_MARGIN * (n - 2.0) * (rb - ra) / rb);
    let coef = quintic_blend(ra, rb, n, c0)?;

    // The blend must stay superharmonic; scan D0 q densely and reject the
    // parameter combination if it fails anywhere.
    let tol = 1e-9 * rb.powf(-n).max(1.0);
    for k in 0..=2000 {
        let r = ra + (rb - ra) * k as f64 / 2000.0;
        let lap = eval_poly_deriv(&coef, r, 2) + (n - 1.0) / r * eval_poly_deriv(&coef, r, 1);
        if lap > tol {
            return Err(Error::ConstructionFailed {
                radius: r,
                message: format!("cap blend is subharmonic (D0 q = {lap:.3e} > 0)"),
            });
        }
    }

    let rs2 = r_center * r_center;
    let w0 = grid
        .nodes()
        .iter()
        .map(|&r| {
            let q = if r <= ra {
                c0
            } else if r >= rb {
                r.powf(2.0 - n)
            } else {
                eval_poly(&coef, r)
            };
            let qt = (rs2 + r * r).powf((2.0 - n) / 2.0);
            1.0 + amplitude * q + tail * qt
        })
        .collect();
    ConformalData::from_w0(w0, 0.0)
}

/// Loads a `r,w0` CSV profile (comment lines start with '#') and resamples
/// it onto the solver grid with monotone cubic (Fritsch-Carlson) interpolation.
pub fn load_profile(path: &Path, grid: &RadialGrid, _c: &Constants) -> Result<ConformalData> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Ingestion(format!("cannot read {}: {e}", path.display())))?;
    let mut rs: Vec<f64> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["r", "w0"] {
                return Err(Error::Ingestion(format!(
                    "line {}: expected header 'r,w0', got '{line}'",
                    lineno + 1
                )));
            }
            saw_header = true;
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (rv, wv) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::Ingestion(format!(
                    "line {}: expected two comma-separated columns",
                    lineno + 1
                )))
            }
        };
        let rv: f64 = rv.parse().map_err(|e| {
            Error::Ingestion(format!("line {}: bad radius '{rv}': {e}", lineno + 1))
        })?;
        let wv: f64 = wv.parse().map_err(|e| {
            Error::Ingestion(format!("line {}: bad w0 '{wv}': {e}", lineno + 1))
        })?;
        if let Some(&prev) = rs.last() {
            if rv <= prev {
                return Err(Error::Ingestion(format!(
                    "line {}: radii must be strictly increasing",
                    lineno + 1
                )));
            }
        }
        if !(wv > 0.0) {
            return Err(Error::Ingestion(format!(
                "line {}: w0 must be positive, got {wv}",
                lineno + 1
            )));
        }
        rs.push(rv);
        ws.push(wv);
    }
    if rs.len() < 4 {
        return Err(Error::Ingestion(format!(
            "profile has only {} samples, need at least 4",
            rs.len()
        )));
    }
    if *rs.last().unwrap() < grid.r_max() / 2.0 {
        return Err(Error::Ingestion(format!(
            "profile extends to r = {} which is less than half the grid radius {}",
            rs.last().unwrap(),
            grid.r_max()
        )));
    }
    let slopes = monotone_cubic_slopes(&rs, &ws);
    let w0 = grid
        .nodes()
        .iter()
        .map(|&r| hermite_eval(&rs, &ws, &slopes, r))
        .collect();
    ConformalData::from_w0(w0, 0.0)
}

/// Fritsch-Carlson tangents: monotone data stays monotone after interpolation.
fn monotone_cubic_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = x.len();
    let d: Vec<f64> = (0..m - 1)
        .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
        .collect();
    let mut t = vec![0.0; m];
    t[0] = d[0];
    t[m - 1] = d[m - 2];
    for i in 1..m - 1 {
        t[i] = if d[i - 1] * d[i] <= 0.0 {
            0.0
        } else {
            // weighted harmonic mean
            let w1 = 2.0 * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
            let w2 = (x[i + 1] - x[i]) + 2.0 * (x[i] - x[i - 1]);
            (w1 + w2) / (w1 / d[i - 1] + w2 / d[i])
        };
    }
    t
}

fn hermite_eval(x: &[f64], y: &[f64], t: &[f64], xi: f64) -> f64 {
    let m = x.len();
    if xi <= x[0] {
        return y[0] + t[0] * (xi - x[0]);
    }
    if xi >= x[m - 1] {
        return y[m - 1] + t[m - 1] * (xi - x[m - 1]);
    }
    let j = x.partition_point(|&v| v <= xi).min(m - 1) - 1;
    let h = x[j + 1] - x[j];
    let s = (xi - x[j]) / h;
    let (s2, s3) = (s * s, s * s * s);
    y[j] * (2.0 * s3 - 3.0 * s2 + 1.0)
        + t[j] * h * (s3 - 2.0 * s2 + s)
        + y[j + 1] * (-2.0 * s3 + 3.0 * s2)
        + t[j + 1] * h * (s3 - s2)
}

#[derive(Debug, Clone)]
pub struct ScalarReport {
    pub min_r: f64,
    pub max_abs_r: f64,
    pub integral_abs: f64,
    pub pass: bool,
}

/// Checks the curvature hypotheses: R_{g0} >= 0 (within a rounding-scaled
/// tolerance) and R_{g0} integrable on the grid.
pub fn verify_nonneg_scalar(
    data: &ConformalData,
    grid: &RadialGrid,
    c: &Constants,
) -> Result<ScalarReport> {
    let r_g0 = scalar_curvature(grid, c, &data.w0, data.w0_origin_flux)?;
    let interior = &r_g0[..r_g0.len() - 1];
    let min_r = interior.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_abs_r = interior.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let weight = volume_element(grid, c, &data.w0)?;
    let integrand: Vec<f64> = r_g0
        .iter()
        .zip(&weight)
        .map(|(&rv, &wv)| rv.abs() * wv)
        .collect();
    let integral_abs = grid.trapezoid(&integrand);
    let pass = min_r >= -1e-10 * (1.0 + max_abs_r) && integral_abs.is_finite();
    Ok(ScalarReport { min_r, max_abs_r, integral_abs, pass })
}
