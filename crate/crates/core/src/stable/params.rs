use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{param_err, Result};

/// Exponent and dimension of a rotationally invariant stable law whose
/// characteristic function is `exp(-t |xi|^alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    alpha: f64,
    dim: usize,
    extended: bool,
}

impl StableParams {
    /// Parameters for the SDE modules: `1 < alpha < 2`.
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return param_err(format!("alpha must lie in (1,2), got {alpha}"));
        }
        Self::check_dim(dim)?;
        Ok(Self {
            alpha,
            dim,
            extended: false,
        })
    }

    /// Admits `alpha` in `(0, 2]`. Used for the Cauchy and Gaussian oracles.
    pub fn extended(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return param_err(format!("alpha must lie in (0,2], got {alpha}"));
        }
        Self::check_dim(dim)?;
        Ok(Self {
            alpha,
            dim,
            extended: true,
        })
    }

    fn check_dim(dim: usize) -> Result<()> {
        if dim == 0 {
            return param_err("dimension must be at least 1");
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_extended(&self) -> bool {
        self.extended
    }

    /// Tail exponent `d + alpha` of the density.
    pub fn tail_exponent(&self) -> f64 {
        self.dim as f64 + self.alpha
    }

    /// Fourier multiplier of the generator, `-|xi|^alpha`.
    pub fn symbol(&self, xi_norm: f64) -> f64 {
        -xi_norm.powf(self.alpha)
    }

    /// Closed form `p(1, 0) = (2 pi)^-d |S^{d-1}| Gamma(d/alpha) / alpha`.
    pub fn density_at_origin(&self) -> f64 {
        let d = self.dim as f64;
        let sphere = sphere_area(self.dim);
        (2.0 * PI).powf(-d) * sphere * puruspe::gamma(d / self.alpha) / self.alpha
    }

    /// Leading tail coefficient `c` in `p(1,x) ~ c |x|^{-d-alpha}`.
    pub fn tail_coefficient(&self) -> f64 {
        let a = self.alpha;
        let d = self.dim as f64;
        2f64.powf(a) * PI.powf(-d / 2.0 - 1.0)
            * puruspe::gamma(a / 2.0 + 1.0)
            * puruspe::gamma((a + d) / 2.0)
            * (PI * a / 2.0).sin()
    }
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(dim: usize) -> f64 {
    let d = dim as f64;
    2.0 * PI.powf(d / 2.0) / puruspe::gamma(d / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(StableParams::new(1.0, 1).is_err());
        assert!(StableParams::new(2.0, 1).is_err());
        assert!(StableParams::new(1.5, 0).is_err());
        assert!(StableParams::extended(2.0, 1).is_ok());
        assert!(StableParams::extended(0.0, 1).is_err());
        assert!(StableParams::extended(2.1, 1).is_err());
    }

    #[test]
    fn origin_value_matches_one_dimensional_form() {
        let p = StableParams::new(1.5, 1).unwrap();
        let direct = puruspe::gamma(1.0 + 1.0 / 1.5) / PI;
        assert!((p.density_at_origin() - direct).abs() < 1e-14);
        let g = StableParams::extended(2.0, 1).unwrap();
        assert!((g.density_at_origin() - 0.5 / PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn tail_coefficient_one_dimensional() {
        let p = StableParams::new(1.5, 1).unwrap();
        let direct = puruspe::gamma(2.5) * (0.75 * PI).sin() / PI;
        assert!((p.tail_coefficient() - direct).abs() < 1e-13);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }
}
