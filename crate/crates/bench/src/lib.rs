//! Shared fixtures for the benchmarks.

use stable_ddsde::fokker_planck::{DriftComponent, Saturation, SpatialProfile};
use stable_ddsde::stable::build_kernel_table;
use stable_ddsde::{DriftSpec, InitialDensity, KernelTable, StableParams, TorusGrid};

pub const ALPHA: f64 = 1.5;

pub fn params() -> StableParams {
    StableParams::new(ALPHA, 1).expect("valid parameters")
}

pub fn table() -> KernelTable {
    build_kernel_table(params(), 2048).expect("kernel table")
}

/// The reference grid: extent 80 with 4096 nodes.
pub fn grid() -> TorusGrid {
    TorusGrid::new(80.0, 4096, 1).expect("grid")
}

pub fn product_drift() -> DriftSpec {
    DriftSpec::new(vec![DriftComponent::Product {
        amplitude: 0.5,
        profile: SpatialProfile::Sin,
        saturation: Saturation::Tanh,
    }])
    .expect("drift")
}

pub fn initial() -> InitialDensity {
    InitialDensity::GaussianMixture {
        weights: vec![1.0],
        means: vec![vec![0.0]],
        sigmas: vec![0.25],
    }
}
