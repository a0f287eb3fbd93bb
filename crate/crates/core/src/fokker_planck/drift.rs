use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

/// Spatial factor `g` of a product drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialProfile {
    Sin,
    Cos,
    /// `sign(x) min(|x|, 1)^beta0`: exactly `beta0`-Hölder at the origin.
    SmoothedSign { beta0: f64 },
}

impl SpatialProfile {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SpatialProfile::Sin => x.sin(),
            SpatialProfile::Cos => x.cos(),
            SpatialProfile::SmoothedSign { beta0 } => x.signum() * x.abs().min(1.0).powf(beta0),
        }
    }

    pub fn sup(&self) -> f64 {
        1.0
    }

    /// Hölder-`beta` seminorm of `g` on the line.
    pub fn holder_seminorm(&self, beta: f64) -> f64 {
        match *self {
            // sup_h 2|sin(h/2)| / h^beta, attained for some h in (0, pi]
            SpatialProfile::Sin | SpatialProfile::Cos => (1..=20_000)
                .map(|i| {
                    let h = std::f64::consts::PI * i as f64 / 20_000.0;
                    2.0 * (h / 2.0).sin() / h.powf(beta)
                })
                .fold(0.0, f64::max),
            SpatialProfile::SmoothedSign { beta0 } => {
                if beta > beta0 {
                    f64::INFINITY
                } else {
                    // the worst pair straddles the origin: |x|^b0 + |y|^b0 over (|x|+|y|)^beta,
                    // maximal at x = -y; for beta < b0 the pair x = -y = 1 gives 2^{1-beta}
                    2f64.powf(1.0 - beta)
                }
            }
        }
    }
}

/// Density factor `h` of a product drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Saturation {
    Tanh,
    Clamp01,
}

impl Saturation {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Saturation::Tanh => u.tanh(),
            Saturation::Clamp01 => u.clamp(0.0, 1.0),
        }
    }

    pub fn sup(&self) -> f64 {
        1.0
    }

    pub fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// One component `b_i(x, u)` of the drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftComponent {
    /// `amplitude * g(x_i) * h(u)`.
    Product {
        amplitude: f64,
        profile: SpatialProfile,
        saturation: Saturation,
    },
    /// `-amplitude * clamp(x_i / length, -1, 1)`, independent of `u`.
    SaturatedLinear { amplitude: f64, length: f64 },
    Constant { value: f64 },
}

impl DriftComponent {
    #[inline]
    pub fn eval(&self, xi: f64, u: f64) -> f64 {
        match *self {
            DriftComponent::Product {
                amplitude,
                profile,
                saturation,
            } => amplitude * profile.eval(xi) * saturation.eval(u),
            DriftComponent::SaturatedLinear { amplitude, length } => -amplitude * (xi / length).clamp(-1.0, 1.0),
            DriftComponent::Constant { value } => value,
        }
    }

    pub fn bound(&self) -> f64 {
        match *self {
            DriftComponent::Product {
                amplitude,
                profile,
                saturation,
            } => amplitude.abs() * profile.sup() * saturation.sup(),
            DriftComponent::SaturatedLinear { amplitude, .. } => amplitude.abs(),
            DriftComponent::Constant { value } => value.abs(),
        }
    }

    pub fn lipschitz_u(&self) -> f64 {
        match *self {
            DriftComponent::Product {
                amplitude,
                profile,
                saturation,
            } => amplitude.abs() * profile.sup() * saturation.lipschitz(),
            _ => 0.0,
        }
    }

    /// `sup_u ||b_i(., u)||_{C^beta}`.
    pub fn holder_norm_x(&self, beta: f64) -> f64 {
        match *self {
            DriftComponent::Product {
                amplitude,
                profile,
                saturation,
            } => amplitude.abs() * saturation.sup() * (profile.sup() + profile.holder_seminorm(beta)),
            DriftComponent::SaturatedLinear { amplitude, length } => {
                // sup_h min(h/l, 2) / h^beta is attained at h = 2l
                amplitude.abs() * (1.0 + 2.0 * (2.0 * length).powf(-beta))
            }
            DriftComponent::Constant { value } => value.abs(),
        }
    }
}

/// Drift `b(x, u)` as one [`DriftComponent`] per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub components: Vec<DriftComponent>,
}

impl DriftSpec {
    pub fn new(components: Vec<DriftComponent>) -> Result<Self> {
        if components.is_empty() {
            return param_err("drift needs at least one component");
        }
        for c in &components {
            let ok = match *c {
                DriftComponent::Product { amplitude, profile, .. } => {
                    amplitude.is_finite()
                        && match profile {
                            SpatialProfile::SmoothedSign { beta0 } => beta0 > 0.0 && beta0 <= 1.0,
                            _ => true,
                        }
                }
                DriftComponent::SaturatedLinear { amplitude, length } => amplitude.is_finite() && length > 0.0,
                DriftComponent::Constant { value } => value.is_finite(),
            };
            if !ok {
                return param_err(format!("invalid drift component {c:?}"));
            }
        }
        Ok(Self { components })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            components: vec![DriftComponent::Constant { value: 0.0 }; dim],
        }
    }

    /// The same component in every coordinate.
    pub fn isotropic(component: DriftComponent, dim: usize) -> Result<Self> {
        Self::new(vec![component; dim])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn component(&self, i: usize, xi: f64, u: f64) -> f64 {
        self.components[i].eval(xi, u)
    }

    pub fn eval(&self, x: &[f64], u: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.components[i].eval(x[i], u);
        }
    }

    /// `sup |b|` (Euclidean).
    pub fn bound(&self) -> f64 {
        self.components.iter().map(|c| c.bound().powi(2)).sum::<f64>().sqrt()
    }

    /// Largest component bound, the quantity in the CFL restriction.
    pub fn component_bound(&self) -> f64 {
        self.components.iter().map(|c| c.bound()).fold(0.0, f64::max)
    }

    /// `sup |b(x,u1) - b(x,u2)| / |u1 - u2|`.
    pub fn lipschitz_u(&self) -> f64 {
        self.components.iter().map(|c| c.lipschitz_u().powi(2)).sum::<f64>().sqrt()
    }

    pub fn holder_norm_x(&self, beta: f64) -> f64 {
        self.components.iter().map(|c| c.holder_norm_x(beta)).fold(0.0, f64::max)
    }

    /// True when `b` ignores the density.
    pub fn is_density_independent(&self) -> bool {
        self.lipschitz_u() == 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.components
            .iter()
            .all(|c| matches!(c, DriftComponent::Constant { value } if *value == 0.0))
    }
}
