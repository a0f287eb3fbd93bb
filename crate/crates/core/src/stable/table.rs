use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

use super::params::sphere_area;
use super::quadrature::{asymptotic_density, radial_density};
use super::StableParams;
use crate::error::{param_err, Error, Result};

const R_MIN: f64 = 1e-3;
const R_MAX: f64 = 1e4;
/// Radii up to here are computed by quadrature, beyond by the series.
const R_SPLIT: f64 = 20.0;
/// Gaussian tables stop where the profile is still well above round-off.
const R_MAX_GAUSSIAN: f64 = 8.0;
const MAGIC: &[u8; 4] = b"SKT1";

/// Tabulated unit-time radial profile `p(1, r)`.
///
/// Between tabulated radii the profile is a monotone cubic (Fritsch-Carlson)
/// in `(log r, log p)`; below the first positive radius it is quadratic in
/// `r`; above the last radius it is the power tail `c r^{-d-alpha}`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    params: StableParams,
    radii: Vec<f64>,
    values: Vec<f64>,
    tail_exponent: f64,
    tail_constant: f64,
    log_r: Vec<f64>,
    log_p: Vec<f64>,
    slopes: Vec<f64>,
    mass: f64,
    rho_ratio: (f64, f64),
}

/// Tabulates `p(1, r)` at `r = 0` and `n_radii - 1` log-spaced radii.
pub fn build_kernel_table(params: StableParams, n_radii: usize) -> Result<KernelTable> {
    if n_radii < 64 {
        return param_err(format!("need at least 64 radii, got {n_radii}"));
    }
    let dim = params.dim();
    if !(1..=3).contains(&dim) {
        return param_err(format!("kernel tables support dimensions 1-3, got {dim}"));
    }
    let alpha = params.alpha();
    let r_max = if alpha >= 2.0 { R_MAX_GAUSSIAN } else { R_MAX };
    let m = n_radii - 1;
    let (l0, l1) = (R_MIN.ln(), r_max.ln());
    let mut radii = Vec::with_capacity(n_radii);
    radii.push(0.0);
    radii.extend((0..m).map(|i| (l0 + (l1 - l0) * i as f64 / (m - 1) as f64).exp()));

    let values = radii
        .par_iter()
        .map(|&r| {
            if r > R_SPLIT {
                if let Some(v) = asymptotic_density(alpha, dim, r) {
                    return Ok(v);
                }
            }
            radial_density(alpha, dim, 1.0, r)
        })
        .collect::<Result<Vec<f64>>>()?;
    log::debug!("kernel table alpha={alpha} d={dim}: {n_radii} radii up to {r_max}");
    KernelTable::from_samples(params, radii, values)
}

impl KernelTable {
    /// Assembles a table from samples and runs the build-time checks:
    /// positivity, monotonicity, unit mass and bounded ratio to `rho_alpha`.
    pub fn from_samples(params: StableParams, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 4 {
            return Err(Error::Format("radii and values must have equal length >= 4".into()));
        }
        if radii[0] != 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Format("radii must start at 0 and increase".into()));
        }
        for (i, (&r, &v)) in radii.iter().zip(&values).enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Quadrature {
                    radius: r,
                    reason: format!("non-positive profile value {v}"),
                });
            }
            if i > 0 && v > values[i - 1] {
                return Err(Error::Quadrature {
                    radius: r,
                    reason: format!("profile increases from {} to {v}", values[i - 1]),
                });
            }
        }
        let d = params.dim() as f64;
        let tail_exponent = params.tail_exponent();
        let r_last = *radii.last().unwrap();
        let tail_constant = values.last().unwrap() * r_last.powf(tail_exponent);
        let log_r: Vec<f64> = radii[1..].iter().map(|r| r.ln()).collect();
        let log_p: Vec<f64> = values[1..].iter().map(|p| p.ln()).collect();
        let slopes = pchip_slopes(&log_r, &log_p);

        let mut table = Self {
            params,
            radii,
            values,
            tail_exponent,
            tail_constant,
            log_r,
            log_p,
            slopes,
            mass: f64::NAN,
            rho_ratio: (f64::NAN, f64::NAN),
        };
        table.mass = table.radial_mass();
        if (table.mass - 1.0).abs() > 1e-6 {
            return Err(Error::Quadrature {
                radius: r_last,
                reason: format!("table mass {} differs from 1", table.mass),
            });
        }
        let ratios = table
            .radii
            .iter()
            .zip(&table.values)
            .map(|(r, p)| p * (1.0 + r).powf(d + params.alpha()));
        let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), q| (lo.min(q), hi.max(q)));
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::Quadrature {
                radius: r_last,
                reason: format!("ratio to rho_alpha not bounded: [{lo}, {hi}]"),
            });
        }
        table.rho_ratio = (lo, hi);
        Ok(table)
    }

    /// `int p(1,x) dx` of the interpolated profile: Simpson in `log r` over
    /// the table, exact integrals of the quadratic core and the power tail.
    fn radial_mass(&self) -> f64 {
        let d = self.params.dim() as i32;
        let area = sphere_area(self.params.dim());
        let (p0, p1, r1) = (self.values[0], self.values[1], self.radii[1]);
        // int_0^r1 (p0 + (p1-p0)(r/r1)^2) r^{d-1} dr
        let core = p0 * r1.powi(d) / d as f64 + (p1 - p0) * r1.powi(d) / (d + 2) as f64;
        let g: Vec<f64> = self.radii[1..]
            .iter()
            .zip(&self.values[1..])
            .map(|(r, p)| p * r.powi(d))
            .collect();
        let h = self.log_r[1] - self.log_r[0];
        let body = if g.len() % 2 == 1 {
            crate::quadrature::simpson_uniform(&g, h)
        } else {
            let n = g.len();
            crate::quadrature::simpson_uniform(&g[..n - 1], h) + 0.5 * h * (g[n - 2] + g[n - 1])
        };
        let r_last = *self.radii.last().unwrap();
        let tail = self.tail_constant * r_last.powf(-self.params.alpha()) / self.params.alpha();
        area * (core + body + tail)
    }

    pub fn params(&self) -> &StableParams {
        &self.params
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }

    /// Mass of the interpolated profile, computed at build time.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Min and max of `p(1,r_i) / rho_alpha(1,r_i)` over the table.
    pub fn rho_ratio_bounds(&self) -> (f64, f64) {
        self.rho_ratio
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    /// Interpolated `p(1, r)` and `d/dr p(1, r)`.
    pub fn profile_with_slope(&self, r: f64) -> (f64, f64) {
        let r = r.abs();
        let r1 = self.radii[1];
        if r < r1 {
            let a = (self.values[1] - self.values[0]) / (r1 * r1);
            return (self.values[0] + a * r * r, 2.0 * a * r);
        }
        let r_last = self.r_max();
        if r > r_last {
            let v = self.tail_constant * r.powf(-self.tail_exponent);
            return (v, -self.tail_exponent * v / r);
        }
        let x = r.ln();
        let n = self.log_r.len();
        let i = self.log_r.partition_point(|&l| l <= x).clamp(1, n - 1) - 1;
        let h = self.log_r[i + 1] - self.log_r[i];
        let s = (x - self.log_r[i]) / h;
        let (y0, y1) = (self.log_p[i], self.log_p[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let y = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        let dy = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / h;
        let p = y.exp();
        (p, p * dy / r)
    }

    pub fn profile(&self, r: f64) -> f64 {
        self.profile_with_slope(r).0
    }

    /// `p(t, x)` for `|x| = r`, without argument checks.
    #[inline]
    pub fn density_radial(&self, t: f64, r: f64) -> f64 {
        let a = self.params.alpha();
        let s = t.powf(-1.0 / a);
        s.powi(self.params.dim() as i32) * self.profile(r * s)
    }

    /// `d/dr p(t, r)`.
    #[inline]
    pub fn radial_derivative(&self, t: f64, r: f64) -> f64 {
        let a = self.params.alpha();
        let s = t.powf(-1.0 / a);
        s.powi(self.params.dim() as i32 + 1) * self.profile_with_slope(r * s).1
    }

    /// `d/dt p(t, r)` from the scaling form:
    /// `-(1/(alpha t)) t^{-d/alpha} (d f(y) + y f'(y))`, `y = r t^{-1/alpha}`.
    pub fn time_derivative(&self, t: f64, r: f64) -> f64 {
        let a = self.params.alpha();
        let d = self.params.dim() as f64;
        let s = t.powf(-1.0 / a);
        let y = r * s;
        let (f, df) = self.profile_with_slope(y);
        -s.powi(self.params.dim() as i32) * (d * f + y * df) / (a * t)
    }

    /// Writes the versioned binary format: magic `SKT1`, alpha (f64),
    /// dimension (i32), radius count (i32), radii, values; little-endian.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.params.alpha().to_le_bytes())?;
        w.write_all(&(self.params.dim() as i32).to_le_bytes())?;
        w.write_all(&(self.radii.len() as i32).to_le_bytes())?;
        for v in self.radii.iter().chain(&self.values) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + 16 * self.radii.len());
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a kernel table (bad magic)".into()));
        }
        let mut b8 = [0u8; 8];
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b8)?;
        let alpha = f64::from_le_bytes(b8);
        r.read_exact(&mut b4)?;
        let dim = i32::from_le_bytes(b4);
        r.read_exact(&mut b4)?;
        let n = i32::from_le_bytes(b4);
        if dim < 1 || n < 4 {
            return Err(Error::Format(format!("bad header: dim={dim} n_radii={n}")));
        }
        let params = if alpha > 1.0 && alpha < 2.0 {
            StableParams::new(alpha, dim as usize)?
        } else {
            StableParams::extended(alpha, dim as usize)?
        };
        let mut read_vec = |len: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                r.read_exact(&mut b8)?;
                out.push(f64::from_le_bytes(b8));
            }
            Ok(out)
        };
        let radii = read_vec(n as usize)?;
        let values = read_vec(n as usize)?;
        Self::from_samples(params, radii, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }
}

/// Fritsch-Carlson slopes with the three-point end conditions of `pchip`.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if del[k - 1] * del[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], del[0], del[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return param_err(format!("time must be positive, got {t}"));
    }
    Ok(())
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_point(x: &[f64], params: &StableParams) -> Result<()> {
    if x.len() != params.dim() {
        return param_err(format!("point has {} coordinates, expected {}", x.len(), params.dim()));
    }
    Ok(())
}

/// `p(t, x) = t^{-d/alpha} p(1, t^{-1/alpha} x)`.
pub fn p_alpha(t: f64, x: &[f64], table: &KernelTable) -> Result<f64> {
    check_time(t)?;
    check_point(x, table.params())?;
    Ok(table.density_radial(t, norm(x)))
}

/// Gradient of the interpolated kernel, `p'(r) x / r`.
pub fn grad_p_alpha(t: f64, x: &[f64], table: &KernelTable) -> Result<Vec<f64>> {
    check_time(t)?;
    check_point(x, table.params())?;
    let r = norm(x);
    if r == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    let dr = table.radial_derivative(t, r);
    Ok(x.iter().map(|xi| dr * xi / r).collect())
}

/// `rho_alpha(t, x) = t / (t^{1/alpha} + |x|)^{d+alpha}`.
pub fn rho_alpha(t: f64, x: &[f64], params: &StableParams) -> Result<f64> {
    check_time(t)?;
    check_point(x, params)?;
    Ok(rho_radial(t, norm(x), params))
}

#[inline]
pub fn rho_radial(t: f64, r: f64, params: &StableParams) -> f64 {
    t / (t.powf(1.0 / params.alpha()) + r).powf(params.tail_exponent())
}
