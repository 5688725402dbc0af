//! Numerical laboratory for the Yamabe flow on asymptotically flat,
//! rotationally symmetric, conformally flat metrics.
//!
//! The metric is `g = U^{4/(n-2)} delta` with `U = u * w0`; the flow evolves
//! `u` by `d(u^N)/dt = L_{g0} u` with `u(.,0) = 1`. The crate provides the
//! discrete geometry kernels, initial-data constructors, the implicit time
//! integrator (full-domain and exhaustion-by-Dirichlet variants), mass and
//! functional diagnostics, and the weighted-norm toolkit.

pub mod constants;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod initial;
pub mod linalg;
pub mod norms;

pub use constants::Constants;
pub use error::Error;
pub use grid::RadialGrid;
pub use initial::ConformalData;
