//! Spectral solver for the nonlinear nonlocal Fokker-Planck equation and
//! the uniqueness diagnostics built on it.

mod diagnostics;
mod drift;
mod flow;
mod initial;
mod solver;

pub use diagnostics::{
    bootstrap_regularity, contraction_map, fp_residual, gronwall_contraction, linear_duhamel_residual, lq_density_bound,
    BootstrapReport, ContractionReport, LinearResidual, LqReport,
};
pub use drift::{DriftComponent, DriftSpec, Saturation, SpatialProfile};
pub use flow::DensityFlow;
pub use initial::InitialDensity;
pub use solver::{nfp_solve, nfp_solve_grid, SolverOptions};
