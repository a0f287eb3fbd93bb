//! Littlewood-Paley blocks, Besov and Hölder norms, and the nonlocal heat
//! equation on a periodic grid.

mod grid;
mod ops;
mod partition;

pub use grid::{forward, inverse_real, GridFunction, TorusGrid};
pub use ops::{
    derivative_sup, frac_laplacian, heat_propagate, heat_semigroup, holder_norm, holder_quotient_points,
    holder_seminorm, lp_heat_integral, random_band_limited, schauder_constant, HeatBlockIntegral, SchauderReport,
};
pub use partition::{besov_norm, block, block_multiplier, build_partition, chi, psi, BesovProfile, DyadicPartition, Exponent};
