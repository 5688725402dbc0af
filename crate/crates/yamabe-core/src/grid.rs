use crate::constants::Constants;
use crate::error::{Error, Result};

pub const MAX_STRETCH: f64 = 1.1;

/// Strictly increasing radial nodes with a geometrically stretched spacing.
///
/// The grid is staggered about the origin: the first node sits at h0/2 so
/// that every field can be evenly reflected across r = 0 without a node at
/// the singularity of the (n-1)/r term.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    h0: f64,
    stretch: f64,
    r_max: f64,
}

impl RadialGrid {
    /// Builds nodes r_0 = h0/2, r_{i+1} = r_i + h_i with h_{i+1} = s * h_i,
    /// then rescales the whole grid so the last node lands on r_max exactly.
    pub fn geometric(h0: f64, stretch: f64, r_max: f64) -> Result<Self> {
        if !(h0 > 0.0) || !(r_max > h0) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < h0 < r_max, got h0 = {h0}, r_max = {r_max}"
            )));
        }
        if !(1.0..=MAX_STRETCH).contains(&stretch) {
            return Err(Error::InvalidGrid(format!(
                "stretch factor must lie in [1, {MAX_STRETCH}], got {stretch}"
            )));
        }
        let mut nodes = vec![h0 / 2.0];
        let mut h = h0;
        while *nodes.last().unwrap() < r_max {
            let next = nodes.last().unwrap() + h;
            nodes.push(next);
            h *= stretch;
        }
        let scale = r_max / nodes.last().unwrap();
        for r in &mut nodes {
            *r *= scale;
        }
        *nodes.last_mut().unwrap() = r_max;
        if nodes.len() < 16 {
            return Err(Error::InvalidGrid(format!(
                "grid too short ({} nodes, need >= 16); decrease h0",
                nodes.len()
            )));
        }
        Ok(RadialGrid { nodes, h0: h0 * scale, stretch, r_max })
    }

    /// Restriction of this grid to nodes r <= cutoff; the truncated grid's
    /// outer radius is its own last node (used by the exhaustion solver).
    pub fn truncate(&self, cutoff: f64) -> Result<Self> {
        let m = self.nodes.partition_point(|&r| r <= cutoff * (1.0 + 1e-12));
        if m < 16 {
            return Err(Error::InvalidGrid(format!(
                "truncation at r = {cutoff} leaves only {m} nodes"
            )));
        }
        let nodes = self.nodes[..m].to_vec();
        let r_max = *nodes.last().unwrap();
        Ok(RadialGrid { nodes, h0: self.h0, stretch: self.stretch, r_max })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Index of the node closest to `radius`.
    pub fn nearest(&self, radius: f64) -> usize {
        let i = self.nodes.partition_point(|&r| r < radius);
        if i == 0 {
            0
        } else if i >= self.nodes.len() {
            self.nodes.len() - 1
        } else if radius - self.nodes[i - 1] <= self.nodes[i] - radius {
            i - 1
        } else {
            i
        }
    }

    /// Trapezoid quadrature of the node samples `f` over [r_0, r_{M-1}].
    pub fn trapezoid(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.nodes.len());
        let mut acc = 0.0;
        for i in 0..f.len() - 1 {
            acc += 0.5 * (f[i] + f[i + 1]) * (self.nodes[i + 1] - self.nodes[i]);
        }
        acc
    }
}

/// Flux-form discretization of the flat radial Laplacian
/// `D0 f = f'' + (n-1) f'/r = r^{1-n} (r^{n-1} f')'`.
///
/// Face coefficients use the harmonic coordinate p = r^{2-n}:
/// kappa_{i+1/2} = (2-n)/(p_{i+1}-p_i) equals the exact face flux
/// r^{n-1} f' for f in span{1, p}, and the cell volumes are fixed by
/// exactness on r^2. The scheme is therefore exact (to rounding) on
/// constants and r^{2-n} profiles and second-order accurate otherwise.
#[derive(Debug, Clone)]
pub struct LaplaceOps {
    /// p = r^{2-n} at the nodes.
    pub p: Vec<f64>,
    /// Face flux coefficients, length M-1.
    pub kappa: Vec<f64>,
    /// Cell volumes (r^{n-1} dr measure), length M; the last entry is unused
    /// because the outermost node carries the boundary condition.
    pub vol: Vec<f64>,
}

impl LaplaceOps {
    pub fn new(grid: &RadialGrid, c: &Constants) -> Self {
        let r = grid.nodes();
        let m = r.len();
        let n = c.n as f64;
        let p: Vec<f64> = r.iter().map(|&ri| ri.powf(2.0 - n)).collect();
        let kappa: Vec<f64> = (0..m - 1).map(|i| (2.0 - n) / (p[i + 1] - p[i])).collect();
        let mut vol = vec![0.0; m];
        let r2: Vec<f64> = r.iter().map(|&ri| ri * ri).collect();
        vol[0] = kappa[0] * (r2[1] - r2[0]) / (2.0 * n);
        for i in 1..m - 1 {
            vol[i] =
                (kappa[i] * (r2[i + 1] - r2[i]) - kappa[i - 1] * (r2[i] - r2[i - 1])) / (2.0 * n);
        }
        vol[m - 1] = f64::NAN;
        LaplaceOps { p, kappa, vol }
    }

    /// Applies the Laplacian. `origin_flux` is lim_{r->0} r^{n-1} f'(r),
    /// zero for every regular (even) field; profiles with an r^{2-n}
    /// component at the origin pass their analytic flux. The last node
    /// copies its neighbor (the boundary row lives elsewhere).
    pub fn apply(&self, f: &[f64], origin_flux: f64) -> Vec<f64> {
        let m = f.len();
        assert_eq!(m, self.vol.len());
        let mut out = vec![0.0; m];
        let mut flux_in = origin_flux;
        for i in 0..m - 1 {
            let flux_out = self.kappa[i] * (f[i + 1] - f[i]);
            out[i] = (flux_out - flux_in) / self.vol[i];
            flux_in = flux_out;
        }
        out[m - 1] = out[m - 2];
        out
    }
}
