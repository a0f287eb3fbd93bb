//! Numerical toolkit for density-dependent SDEs driven by rotationally
//! invariant alpha-stable noise.

pub mod besov;
pub mod error;
pub mod euler;
pub mod fokker_planck;
pub mod quadrature;
pub mod rng;
pub mod stable;

pub use error::{Error, Result};
pub use rng::{stream_id, RngStream, StreamDomain};
pub use stable::{KernelTable, StableParams};
pub use besov::{GridFunction, TorusGrid};
pub use fokker_planck::{DensityFlow, DriftSpec, InitialDensity};
pub use euler::{EulerConfig, ParticleEnsemble};
