use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::besov::{GridFunction, TorusGrid};
use crate::error::{param_err, Result};
use crate::rng::RngStream;

/// Initial law `mu_0` with density `rho_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDensity {
    /// Isotropic Gaussian components `N(mean_k, sigma_k^2 I)`.
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        sigmas: Vec<f64>,
    },
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    /// Proportional to `max(0, 1 - |x - center|^2 / width^2)^beta0`.
    HolderBump { center: Vec<f64>, width: f64, beta0: f64 },
}

impl InitialDensity {
    pub fn gaussian(mean: f64, sigma: f64) -> Self {
        InitialDensity::GaussianMixture {
            weights: vec![1.0],
            means: vec![vec![mean]],
            sigmas: vec![sigma],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialDensity::GaussianMixture { weights, means, sigmas } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != sigmas.len() {
                    return param_err("mixture needs matching, non-empty weights, means and sigmas");
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                    return param_err("mixture weights must be non-negative with positive sum");
                }
                if sigmas.iter().any(|s| !(*s > 0.0)) {
                    return param_err("mixture sigmas must be positive");
                }
                let d = means[0].len();
                if d == 0 || means.iter().any(|m| m.len() != d) {
                    return param_err("mixture means must share one positive dimension");
                }
            }
            InitialDensity::UniformBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() || lower.iter().zip(upper).any(|(a, b)| !(b > a)) {
                    return param_err("uniform box needs lower < upper in every coordinate");
                }
            }
            InitialDensity::HolderBump { center, width, beta0 } => {
                if center.is_empty() || !(*width > 0.0) || !(*beta0 > 0.0 && *beta0 <= 1.0) {
                    return param_err("bump needs a center, positive width and beta0 in (0,1]");
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialDensity::GaussianMixture { means, .. } => means[0].len(),
            InitialDensity::UniformBox { lower, .. } => lower.len(),
            InitialDensity::HolderBump { center, .. } => center.len(),
        }
    }

    /// Unnormalized density at `x` (normalized for mixtures and boxes).
    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            InitialDensity::GaussianMixture { weights, means, sigmas } => {
                let total: f64 = weights.iter().sum();
                let d = x.len() as i32;
                weights
                    .iter()
                    .zip(means)
                    .zip(sigmas)
                    .map(|((w, m), s)| {
                        let r2: f64 = x.iter().zip(m).map(|(a, b)| (a - b).powi(2)).sum();
                        w / total * (-r2 / (2.0 * s * s)).exp() / (2.0 * PI * s * s).powf(d as f64 / 2.0)
                    })
                    .sum()
            }
            InitialDensity::UniformBox { lower, upper } => {
                let inside = x.iter().zip(lower.iter().zip(upper)).all(|(v, (a, b))| *v >= *a && *v < *b);
                if inside {
                    1.0 / lower.iter().zip(upper).map(|(a, b)| b - a).product::<f64>()
                } else {
                    0.0
                }
            }
            InitialDensity::HolderBump { center, width, beta0 } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
                (1.0 - r2 / (width * width)).max(0.0).powf(*beta0)
            }
        }
    }

    /// The density on `grid`, non-negative and normalized to unit grid mass.
    /// Boxes use exact cell overlaps so that their edges are not aliased.
    pub fn on_grid(&self, grid: &TorusGrid) -> Result<GridFunction> {
        self.validate()?;
        if self.dim() != grid.dim() {
            return param_err(format!("initial density is {}-d, grid is {}-d", self.dim(), grid.dim()));
        }
        let h = grid.spacing();
        let mut f = match self {
            InitialDensity::UniformBox { lower, upper } => GridFunction::from_fn(grid, |x| {
                x.iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(c, (a, b))| ((c + h / 2.0).min(*b) - (c - h / 2.0).max(*a)).max(0.0) / h)
                    .product()
            }),
            _ => GridFunction::from_fn(grid, |x| self.density(x)),
        };
        let mass = f.integral();
        if !(mass > 0.0) {
            return param_err("initial density has no mass on the grid");
        }
        for v in f.values_mut() {
            *v /= mass;
        }
        Ok(f)
    }

    /// One draw from the law.
    pub fn sample(&self, rng: &mut RngStream, out: &mut [f64]) {
        match self {
            InitialDensity::GaussianMixture { weights, means, sigmas } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut k = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        k = i;
                        break;
                    }
                    u -= w;
                }
                for (o, m) in out.iter_mut().zip(&means[k]) {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = m + sigmas[k] * z;
                }
            }
            InitialDensity::UniformBox { lower, upper } => {
                for (o, (a, b)) in out.iter_mut().zip(lower.iter().zip(upper)) {
                    *o = rng.random_range(*a..*b);
                }
            }
            InitialDensity::HolderBump { center, width, .. } => loop {
                for (o, c) in out.iter_mut().zip(center) {
                    *o = c + width * rng.random_range(-1.0..1.0);
                }
                if rng.random::<f64>() < self.density(out) {
                    return;
                }
            },
        }
    }

    /// Regularity of `rho_0`: `beta0` for bumps, infinite for smooth mixtures,
    /// zero for boxes.
    pub fn regularity(&self) -> f64 {
        match self {
            InitialDensity::GaussianMixture { .. } => f64::INFINITY,
            InitialDensity::UniformBox { .. } => 0.0,
            InitialDensity::HolderBump { beta0, .. } => *beta0,
        }
    }

    /// `||rho_0||_{C^beta}` of the normalized density, by exhaustive pair
    /// scan on the grid.
    pub fn holder_norm(&self, grid: &TorusGrid, beta: f64) -> Result<f64> {
        crate::besov::holder_norm(&self.on_grid(grid)?, beta)
    }
}
