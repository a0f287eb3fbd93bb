//! Rotationally invariant alpha-stable processes: sampling, the heat kernel
//! and empirical checks of its pointwise bounds.

mod bounds;
mod params;
pub mod quadrature;
mod sampler;
mod table;

pub use bounds::{
    ck_defect, heat_equation_residual, kernel_bound_report, periodized_kernel, BoundReport, HolderConstant,
};
pub use params::{sphere_area, StableParams};
pub use sampler::{fill_increment, sample_increment, sample_one_sided_stable};
pub(crate) use sampler::fill_increment_unchecked;
pub use table::{build_kernel_table, grad_p_alpha, p_alpha, rho_alpha, rho_radial, KernelTable};
