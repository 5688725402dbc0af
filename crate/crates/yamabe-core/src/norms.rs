//! Weighted Lebesgue and Hoelder norms on radial space-time samples:
//! elliptic, parabolic, and the tilde variants that carry no weights on
//! time-derivative orders, plus their scaling and product identities.

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::linalg::fit_slope;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Elliptic,
    ParabolicPlain,
    ParabolicTilde,
}

#[derive(Debug, Clone, Copy)]
pub struct WeightSpec {
    pub beta: f64,
    /// Integrability exponent; f64::INFINITY selects the sup norm.
    pub q: f64,
    /// Derivative count for Hoelder norms.
    pub k: usize,
    /// Hoelder exponent in (0, 1).
    pub alpha: f64,
    pub variant: Variant,
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 1.0) {
            return Err(Error::Domain(format!("q must be >= 1, got {}", self.q)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Rectangular space-time samples v(r_i, t_j); `values[j][i]` is the value
/// at time t_j and radius r_i. Elliptic norms use the first time slice.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    pub radii: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn new(radii: Vec<f64>, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if radii.is_empty() || times.is_empty() {
            return Err(Error::Shape("field needs at least one radius and time".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
            return Err(Error::Shape("radii must be positive and strictly increasing".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Shape("times must be strictly increasing".into()));
        }
        if values.len() != times.len() || values.iter().any(|row| row.len() != radii.len()) {
            return Err(Error::Shape("values must be times x radii rectangular".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Shape("field values must be finite".into()));
        }
        Ok(SpaceTimeField { radii, times, values })
    }

    /// Single-time field (elliptic usage).
    pub fn radial(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(radii, vec![0.0], vec![values])
    }
}

/// Trapezoid quadrature weights for samples at `x`.
fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut w = vec![0.0; m];
    if m == 1 {
        w[0] = 1.0;
        return w;
    }
    for i in 0..m - 1 {
        let h = x[i + 1] - x[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// Node measures mu_{ij} of the weight-independent part of the integrals:
/// r^{-n} dx [dt] = omega r^{-1} dr [dt]. Sharing these across exponents
/// makes the product inequality exact on the discrete samples.
fn node_measures(field: &SpaceTimeField, c: &Constants) -> (Vec<f64>, Vec<f64>) {
    let wr: Vec<f64> = trapezoid_weights(&field.radii)
        .iter()
        .zip(&field.radii)
        .map(|(&w, &r)| c.omega * w / r)
        .collect();
    let wt = if field.times.len() == 1 {
        vec![1.0]
    } else {
        trapezoid_weights(&field.times)
    };
    (wr, wt)
}

/// Weighted Lebesgue norm of the samples:
/// (int |v|^q r^{-beta q - n} dx [dt])^{1/q}, or sup r^{-beta} |v| for
/// q = infinity. Elliptic specs integrate over space only (first slice).
pub fn lq_beta_norm(field: &SpaceTimeField, spec: &WeightSpec, c: &Constants) -> Result<f64> {
    spec.validate()?;
    let time_slices: usize = match spec.variant {
        Variant::Elliptic => 1,
        _ => field.times.len(),
    };
    if spec.q.is_infinite() {
        let mut sup = 0.0f64;
        for row in &field.values[..time_slices] {
            for (i, &v) in row.iter().enumerate() {
                sup = sup.max(field.radii[i].powf(-spec.beta) * v.abs());
            }
        }
        return Ok(sup);
    }
    let (wr, wt) = node_measures(field, c);
    let mut acc = 0.0f64;
    for (j, row) in field.values[..time_slices].iter().enumerate() {
        let tw = if spec.variant == Variant::Elliptic { 1.0 } else { wt[j] };
        for (i, &v) in row.iter().enumerate() {
            acc += tw * wr[i] * v.abs().powf(spec.q) * field.radii[i].powf(-spec.beta * spec.q);
        }
    }
    Ok(acc.powf(1.0 / spec.q))
}

/// Nonuniform three-point first derivative on arbitrary increasing
/// abscissae (one-sided at both ends); identically zero for fewer than
/// three samples.
fn deriv_samples(x: &[f64], f: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut out = vec![0.0; m];
    if m < 3 {
        if m == 2 {
            let d = (f[1] - f[0]) / (x[1] - x[0]);
            out[0] = d;
            out[1] = d;
        }
        return out;
    }
    for i in 0..m {
        let c = if i == 0 { 1 } else if i == m - 1 { m - 2 } else { i };
        let (x0, x1, x2) = (x[c - 1], x[c], x[c + 1]);
        let (f0, f1, f2) = (f[c - 1], f[c], f[c + 1]);
        let xx = x[i];
        out[i] = f0 * (2.0 * xx - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + f1 * (2.0 * xx - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + f2 * (2.0 * xx - x0 - x1) / ((x2 - x0) * (x2 - x1));
    }
    out
}

/// values[j][i] -> derivative in the radial index.
fn d_space(field: &SpaceTimeField, values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    values.iter().map(|row| deriv_samples(&field.radii, row)).collect()
}

/// values[j][i] -> derivative in the time index.
fn d_time(field: &SpaceTimeField, values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let nt = values.len();
    let nr = field.radii.len();
    let mut cols_out = vec![vec![0.0; nr]; nt];
    for i in 0..nr {
        let col: Vec<f64> = (0..nt).map(|j| values[j][i]).collect();
        let d = deriv_samples(&field.times[..nt], &col);
        for j in 0..nt {
            cols_out[j][i] = d[j];
        }
    }
    cols_out
}

/// Difference table D^i_x D^j_t v for all (i, j) with i + 2j <= k.
fn difference_tables(field: &SpaceTimeField, k: usize) -> Vec<(usize, usize, Vec<Vec<f64>>)> {
    let mut out = Vec::new();
    let mut dt_base = field.values.clone();
    let mut j = 0;
    loop {
        if 2 * j > k {
            break;
        }
        let mut table = dt_base.clone();
        let mut i = 0;
        while i + 2 * j <= k {
            out.push((i, j, table.clone()));
            table = d_space(field, &table);
            i += 1;
        }
        j += 1;
        if 2 * j <= k {
            dt_base = d_time(field, &dt_base);
        }
    }
    out
}

/// Dyadic annulus key of a radius.
fn annulus_key(r: f64) -> i32 {
    r.log2().floor() as i32
}

/// Deterministic spatial pair sample: all pairs inside each dyadic
/// annulus, plus near-diagonal pairs (index gap <= 4) across annulus
/// boundaries.
fn spatial_pairs(radii: &[f64]) -> Vec<(usize, usize)> {
    let keys: Vec<i32> = radii.iter().map(|&r| annulus_key(r)).collect();
    let mut pairs = Vec::new();
    for i in 0..radii.len() {
        for j in i + 1..radii.len() {
            if keys[i] == keys[j] || j - i <= 4 {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

#[derive(Debug, Clone)]
pub struct HolderReport {
    pub value: f64,
    /// Number of sampled pairs behind the seminorm suprema.
    pub sampling_density: usize,
}

fn check_sampling(field: &SpaceTimeField, variant: Variant) -> Result<()> {
    if variant != Variant::Elliptic && field.times.len() < 2 {
        return Err(Error::Domain(
            "parabolic Hoelder norms need at least 2 time samples".into(),
        ));
    }
    let decades = (field.radii.last().unwrap() / field.radii[0]).log10().max(0.125);
    if (field.radii.len() as f64) < 8.0 * decades {
        return Err(Error::Domain(format!(
            "need >= 8 radii per decade, got {} radii over {:.2} decades",
            field.radii.len(),
            decades
        )));
    }
    Ok(())
}

/// Weighted Hoelder norm: the C^k_beta sup sum plus the mixed-distance
/// seminorm (pair-sampled) plus, for k >= 1, the time-increment seminorm.
pub fn holder_norm(field: &SpaceTimeField, spec: &WeightSpec, c: &Constants) -> Result<HolderReport> {
    let _ = c;
    spec.validate()?;
    check_sampling(field, spec.variant)?;
    let r = &field.radii;
    let t = &field.times;
    let k = spec.k;
    let alpha = spec.alpha;
    let beta = spec.beta;
    let tables = difference_tables(field, k);
    let nt = match spec.variant {
        Variant::Elliptic => 1,
        _ => t.len(),
    };

    // sup-weight sum over i + 2j <= k
    let mut value = 0.0f64;
    for (i, j, table) in &tables {
        if spec.variant == Variant::Elliptic && *j > 0 {
            continue;
        }
        let wexp = match spec.variant {
            Variant::ParabolicTilde => -beta + *i as f64,
            _ => -beta + (*i as f64) + 2.0 * (*j as f64),
        };
        let mut sup = 0.0f64;
        for row in &table[..nt] {
            for (idx, &v) in row.iter().enumerate() {
                sup = sup.max(r[idx].powf(wexp) * v.abs());
            }
        }
        value += sup;
    }

    let pairs = spatial_pairs(r);
    let mut sampling_density = 0usize;
    let mode = ExecMode::auto();

    // top-order seminorm over i + 2j = k
    for (i, j, table) in &tables {
        if i + 2 * j != k {
            continue;
        }
        if spec.variant == Variant::Elliptic && *j > 0 {
            continue;
        }
        match spec.variant {
            Variant::Elliptic | Variant::ParabolicTilde => {
                // same-time spatial pairs, weight min(r)^{-beta+i+alpha}
                // (elliptic: i = k so the exponent is -beta+k+alpha)
                let wexp = -beta + (*i as f64) + alpha;
                sampling_density += pairs.len() * nt;
                let sup = exec::max_over(mode, pairs.len(), |pi| {
                    let (a, b) = pairs[pi];
                    let w = r[a].min(r[b]).powf(wexp) / (r[b] - r[a]).powf(alpha);
                    (0..nt)
                        .map(|jt| w * (table[jt][a] - table[jt][b]).abs())
                        .fold(0.0f64, f64::max)
                });
                value += sup;
            }
            Variant::ParabolicPlain => {
                // mixed parabolic distance delta = |x-y| + |t-s|^{1/2};
                // sampled over same-time spatial pairs and same-point time
                // pairs, weight min(r)^{-beta+k+alpha}
                let wexp = -beta + k as f64 + alpha;
                sampling_density += pairs.len() * nt;
                let sup_space = exec::max_over(mode, pairs.len(), |pi| {
                    let (a, b) = pairs[pi];
                    let w = r[a].min(r[b]).powf(wexp) / (r[b] - r[a]).powf(alpha);
                    (0..nt)
                        .map(|jt| w * (table[jt][a] - table[jt][b]).abs())
                        .fold(0.0f64, f64::max)
                });
                sampling_density += r.len() * nt * (nt - 1) / 2;
                let sup_time = exec::max_over(mode, r.len(), |idx| {
                    let w = r[idx].powf(wexp);
                    let mut s = 0.0f64;
                    for j0 in 0..nt {
                        for j1 in j0 + 1..nt {
                            let delta = (t[j1] - t[j0]).sqrt();
                            s = s.max(
                                w * (table[j1][idx] - table[j0][idx]).abs() / delta.powf(alpha),
                            );
                        }
                    }
                    s
                });
                value += sup_space.max(sup_time);
            }
        }
    }

    // time-increment seminorm over i + 2j = k - 1 (parabolic, k >= 1)
    if k >= 1 && spec.variant != Variant::Elliptic {
        for (i, j, table) in &tables {
            if i + 2 * j != k - 1 {
                continue;
            }
            let wexp = match spec.variant {
                Variant::ParabolicTilde => -beta + *i as f64,
                _ => -beta + (*i as f64) + 2.0 * (*j as f64) + alpha + 1.0,
            };
            sampling_density += r.len() * nt * (nt - 1) / 2;
            let texp = (alpha + 1.0) / 2.0;
            let sup = exec::max_over(mode, r.len(), |idx| {
                let w = r[idx].powf(wexp);
                let mut s = 0.0f64;
                for j0 in 0..nt {
                    for j1 in j0 + 1..nt {
                        s = s.max(
                            w * (table[j1][idx] - table[j0][idx]).abs()
                                / (t[j1] - t[j0]).powf(texp),
                        );
                    }
                }
                s
            });
            value += sup;
        }
    }

    Ok(HolderReport { value, sampling_density })
}

#[derive(Debug, Clone)]
pub struct ScalingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
}

/// Verifies the rescaling identity on matched samples: `unit_field` holds
/// v_R on the unit annulus grid, `scaled_field` holds v on the R-scaled
/// image. For the plain parabolic variant v_R(x,t) = v(Rx, R^2 t) and the
/// norm picks up R^{beta - 2/q}; for the tilde and elliptic variants
/// v_R(x,t) = v(Rx, t) and the factor is R^beta.
pub fn scaling_identity_check(
    unit_field: &SpaceTimeField,
    scaled_field: &SpaceTimeField,
    r_scale: f64,
    spec: &WeightSpec,
    c: &Constants,
) -> Result<ScalingCheck> {
    spec.validate()?;
    if !(r_scale > 0.0) {
        return Err(Error::Domain("scale must be positive".into()));
    }
    if unit_field.radii.len() != scaled_field.radii.len()
        || unit_field.times.len() != scaled_field.times.len()
    {
        return Err(Error::Domain("scaling check needs matched sample shapes".into()));
    }
    for (ru, rs) in unit_field.radii.iter().zip(&scaled_field.radii) {
        if (rs - r_scale * ru).abs() > 1e-9 * rs.abs() {
            return Err(Error::Domain("scaled radii are not the R-image of the unit radii".into()));
        }
    }
    let time_factor = match spec.variant {
        Variant::ParabolicPlain => r_scale * r_scale,
        _ => 1.0,
    };
    for (tu, ts) in unit_field.times.iter().zip(&scaled_field.times) {
        if (ts - time_factor * tu).abs() > 1e-9 * ts.abs().max(1.0) {
            return Err(Error::Domain("scaled times do not match the variant's clock".into()));
        }
    }
    let exponent = if spec.q.is_infinite() || spec.variant != Variant::ParabolicPlain {
        spec.beta
    } else {
        spec.beta - 2.0 / spec.q
    };
    let lhs = lq_beta_norm(unit_field, spec, c)?;
    let rhs = r_scale.powf(exponent) * lq_beta_norm(scaled_field, spec, c)?;
    let denom = lhs.abs().max(rhs.abs()).max(1e-300);
    Ok(ScalingCheck { lhs, rhs, relative_gap: (lhs - rhs).abs() / denom })
}

/// Same identity for the Hoelder norm (sup-type, exact on matched samples).
pub fn scaling_identity_check_holder(
    unit_field: &SpaceTimeField,
    scaled_field: &SpaceTimeField,
    r_scale: f64,
    spec: &WeightSpec,
    c: &Constants,
) -> Result<ScalingCheck> {
    let mut sup_spec = *spec;
    sup_spec.q = f64::INFINITY;
    // reuse the grid-matching validation of the Lebesgue path
    scaling_identity_check(unit_field, scaled_field, r_scale, &sup_spec, c)?;
    let lhs = holder_norm(unit_field, spec, c)?.value;
    let rhs = r_scale.powf(spec.beta) * holder_norm(scaled_field, spec, c)?.value;
    let denom = lhs.abs().max(rhs.abs()).max(1e-300);
    Ok(ScalingCheck { lhs, rhs, relative_gap: (lhs - rhs).abs() / denom })
}

/// Two-factor weighted Hoelder inequality on the shared discrete measure:
/// || v w ||_{L^p_{beta1+beta2}} <= ||v||_{L^q_{beta1}} ||w||_{L^s_{beta2}}
/// with 1/p = 1/q + 1/s; holds with constant 1 on any discrete sample.
/// Returns (lhs, rhs) with w = v.
pub fn holder_product_check(
    field: &SpaceTimeField,
    beta1: f64,
    beta2: f64,
    p: f64,
    q: f64,
    s: f64,
    c: &Constants,
) -> Result<(f64, f64)> {
    let inv = |e: f64| if e.is_infinite() { 0.0 } else { 1.0 / e };
    if !(p >= 1.0 && q >= 1.0 && s >= 1.0) {
        return Err(Error::Domain("exponents must be >= 1".into()));
    }
    if (inv(p) - inv(q) - inv(s)).abs() > 1e-12 {
        return Err(Error::Domain(format!("need 1/p = 1/q + 1/s, got p={p}, q={q}, s={s}")));
    }
    let squared = SpaceTimeField {
        radii: field.radii.clone(),
        times: field.times.clone(),
        values: field
            .values
            .iter()
            .map(|row| row.iter().map(|&v| v * v).collect())
            .collect(),
    };
    let variant = if field.times.len() == 1 { Variant::Elliptic } else { Variant::ParabolicPlain };
    let mk = |beta: f64, qq: f64| WeightSpec { beta, q: qq, k: 0, alpha: 0.5, variant };
    let lhs = lq_beta_norm(&squared, &mk(beta1 + beta2, p), c)?;
    let rhs = lq_beta_norm(field, &mk(beta1, q), c)? * lq_beta_norm(field, &mk(beta2, s), c)?;
    Ok((lhs, rhs))
}

pub const DECAY_FLOOR: f64 = 1e-14;

/// Least-squares slope of log|v| against log r over [r_lo, r_hi]; None
/// when fewer than 5 samples rise above the rounding floor.
pub fn decay_exponent_fit(
    radii: &[f64],
    values: &[f64],
    r_lo: f64,
    r_hi: f64,
) -> Result<Option<f64>> {
    if !(r_lo > 0.0 && r_hi / r_lo >= 10.0) {
        return Err(Error::Domain(format!(
            "decay window [{r_lo}, {r_hi}] must span at least a decade"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&r, &v) in radii.iter().zip(values) {
        if r >= r_lo && r <= r_hi && v.abs() > DECAY_FLOOR {
            xs.push(r.ln());
            ys.push(v.abs().ln());
        }
    }
    if xs.len() < 5 {
        return Ok(None);
    }
    Ok(Some(fit_slope(&xs, &ys)?))
}
