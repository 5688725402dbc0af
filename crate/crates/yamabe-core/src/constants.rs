use crate::error::{Error, Result};

/// Dimension-dependent constants of the flow.
///
/// `exponent` is N = (n+2)/(n-2), `a` = (n-2)/(4(n-1)) is the conformal
/// Laplacian coefficient, `c_n` = (n-1)(n+2)/(n-2) converts u-time to
/// geometric time (t_geom = t_u / c_n), and `omega` is the surface area of
/// the unit (n-1)-sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub n: u32,
    pub exponent: f64,
    pub a: f64,
    pub c_n: f64,
    pub omega: f64,
}

impl Constants {
    pub fn new(n: u32) -> Result<Self> {
        if n < 3 {
            return Err(Error::Domain(format!("dimension must be >= 3, got {n}")));
        }
        let nf = n as f64;
        Ok(Constants {
            n,
            exponent: (nf + 2.0) / (nf - 2.0),
            a: (nf - 2.0) / (4.0 * (nf - 1.0)),
            c_n: (nf - 1.0) * (nf + 2.0) / (nf - 2.0),
            omega: unit_sphere_area(n),
        })
    }
}

/// Area of the unit (n-1)-sphere, 2 pi^{n/2} / Gamma(n/2), via the exact
/// integer / half-integer Gamma recurrences.
pub fn unit_sphere_area(n: u32) -> f64 {
    let pi = std::f64::consts::PI;
    let gamma_half_n = if n % 2 == 0 {
        // Gamma(k) = (k-1)!
        let k = n / 2;
        (1..k).map(|j| j as f64).product::<f64>()
    } else {
        // Gamma(1/2 + m) = (2m-1)!! / 2^m * sqrt(pi)
        let m = n / 2;
        let mut acc = pi.sqrt();
        for j in 0..m {
            acc *= j as f64 + 0.5;
        }
        acc
    };
    2.0 * pi.powf(n as f64 / 2.0) / gamma_half_n
}
