//! The density plug-in Euler scheme for the DDSDE, its Duhamel
//! representation and the diagnostics comparing it with the PDE reference.

mod config;
mod duhamel;
mod ensemble;
mod kde;
mod reports;
mod scheme;

pub use config::{Bandwidth, EulerConfig, MIN_PARTICLES};
pub use duhamel::{duhamel_density_mc, duhamel_density_with, SUBSTEPS};
pub use ensemble::{ParticleEnsemble, CHUNK};
pub use kde::{bin_weighted, kde_estimate, kde_noise_band, kde_with_bandwidth, resolve_bandwidth, MIN_BANDWIDTH};
pub use reports::{
    convergence_row, convergence_study, domination_report, holder_report, mixture_kernel, tabulate, uniqueness_consistency,
    uniqueness_from_runs, ConvergenceRow, ConvergenceTable, DominationReport, HolderReport, ResolvedRegion,
    UniquenessReport,
};
pub use scheme::{continue_euler, drift_displacement, run_euler, snapshot_value, EulerRun, Feedback};
