use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::fokker_planck::{DriftSpec, InitialDensity};
use crate::stable::StableParams;

/// Bandwidth of the Gaussian density estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `1.06 sigma n^{-1/(d+4)}`, with `sigma = min(sd, IQR / 1.34)` averaged over axes.
    Silverman,
    Fixed(f64),
}

impl Default for Bandwidth {
    fn default() -> Self {
        Bandwidth::Silverman
    }
}

/// Parameters of one particle run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerConfig {
    pub t_final: f64,
    /// `N`; the step is `h = t_final / N`.
    pub n_steps: usize,
    pub n_particles: usize,
    #[serde(default)]
    pub bandwidth: Bandwidth,
    pub seed: u64,
    pub drift: DriftSpec,
    pub alpha: f64,
    pub dim: usize,
    pub initial: InitialDensity,
    /// Abort when more than this fraction of the particles leaves the middle
    /// half of the estimation grid.
    #[serde(default = "default_outer")]
    pub max_outer_mass: f64,
}

fn default_outer() -> f64 {
    5e-2
}

pub const MIN_PARTICLES: usize = 1000;

impl EulerConfig {
    pub fn step(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn params(&self) -> Result<StableParams> {
        StableParams::new(self.alpha, self.dim)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return param_err(format!("t_final must be positive, got {}", self.t_final));
        }
        if self.n_steps < 2 {
            return param_err(format!("n_steps must be at least 2, got {}", self.n_steps));
        }
        if self.n_particles < MIN_PARTICLES {
            return param_err(format!("n_particles must be at least {MIN_PARTICLES}, got {}", self.n_particles));
        }
        if self.drift.dim() != self.dim || self.initial.dim() != self.dim {
            return param_err(format!(
                "dimension mismatch: dim {}, drift {}, initial {}",
                self.dim,
                self.drift.dim(),
                self.initial.dim()
            ));
        }
        self.initial.validate()?;
        let hb = self.step() * self.drift.bound();
        if hb > 1.0 {
            return param_err(format!("h sup|b| = {hb} exceeds 1"));
        }
        if let Bandwidth::Fixed(w) = self.bandwidth {
            if !(w > 0.0 && w.is_finite()) {
                return param_err(format!("fixed bandwidth must be positive, got {w}"));
            }
        }
        if !(self.max_outer_mass > 0.0 && self.max_outer_mass <= 1.0) {
            return param_err(format!("max_outer_mass must lie in (0,1], got {}", self.max_outer_mass));
        }
        Ok(())
    }
}
