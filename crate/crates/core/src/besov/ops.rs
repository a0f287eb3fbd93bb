use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use super::grid::{forward, inverse_real, GridFunction, TorusGrid};
use super::partition::{besov_norm, DyadicPartition, Exponent};
use crate::error::{param_err, Result};
use crate::quadrature::simpson_uniform;
use crate::rng::{stream_id, RngStream, StreamDomain};
use crate::stable::KernelTable;

/// Spectral `Delta^{alpha/2} f`: multiplier `-|k|^alpha`.
pub fn frac_laplacian(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return param_err(format!("alpha must lie in (0,2], got {alpha}"));
    }
    Ok(f.radial_multiplier(|k| -k.powf(alpha)))
}

/// `exp(t Delta^{alpha/2}) f`.
pub fn heat_semigroup(f: &GridFunction, alpha: f64, t: f64) -> GridFunction {
    f.radial_multiplier(|k| (-t * k.powf(alpha)).exp())
}

/// `(e^z - 1)/z` and `(e^z - 1 - z)/z^2`, accurate near zero.
fn phi12(z: f64) -> (f64, f64) {
    if z.abs() < 1e-2 {
        let p1 = 1.0 + z / 2.0 + z * z / 6.0 + z.powi(3) / 24.0 + z.powi(4) / 120.0;
        let p2 = 0.5 + z / 6.0 + z * z / 24.0 + z.powi(3) / 120.0 + z.powi(4) / 720.0 + z.powi(5) / 5040.0;
        (p1, p2)
    } else {
        let e = z.exp_m1();
        (e / z, (e - z) / (z * z))
    }
}

/// Solves `du/dt = Delta^{alpha/2} u + f` on `[0, T]` with `steps` uniform
/// steps. Each step is exact for the semigroup and for a source that is
/// linear in time between the step times. `source` is either empty (no
/// source) or holds `f` at the `steps + 1` step times. Returns `u` at the
/// step times, starting with `u0`.
pub fn heat_propagate(
    u0: &GridFunction,
    source: &[GridFunction],
    alpha: f64,
    t_final: f64,
    steps: usize,
) -> Result<Vec<GridFunction>> {
    if steps == 0 {
        return param_err("need at least one step");
    }
    if !(t_final > 0.0) {
        return param_err(format!("final time must be positive, got {t_final}"));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return param_err(format!("alpha must lie in (0,2], got {alpha}"));
    }
    if !source.is_empty() && source.len() != steps + 1 {
        return param_err(format!("source has {} samples, expected {}", source.len(), steps + 1));
    }
    let grid = *u0.grid();
    let h = t_final / steps as f64;
    let coef: Vec<(f64, f64, f64)> = grid
        .wavenumber_norms()
        .iter()
        .map(|&k| {
            let z = -h * k.powf(alpha);
            let (p1, p2) = phi12(z);
            (z.exp(), h * p1, h * p2)
        })
        .collect();
    let mut u = forward(&grid, u0.values());
    let mut f_prev = source.first().map(|f| forward(&grid, f.values()));
    let mut out = Vec::with_capacity(steps + 1);
    out.push(u0.clone());
    for n in 0..steps {
        let f_next = source.get(n + 1).map(|f| forward(&grid, f.values()));
        for (i, c) in u.iter_mut().enumerate() {
            let (e, a, b) = coef[i];
            let mut v = *c * e;
            if let (Some(f0), Some(f1)) = (&f_prev, &f_next) {
                v += f0[i] * a + (f1[i] - f0[i]) * b;
            }
            *c = v;
        }
        out.push(GridFunction::new_unchecked(grid, inverse_real(&grid, u.clone())));
        f_prev = f_next;
    }
    Ok(out)
}

/// Largest Hölder quotient `|f(x) - f(y)| / |x - y|^beta` over all pairs of
/// the given 1-d samples.
pub fn holder_quotient_points(xs: &[f64], values: &[f64], beta: f64) -> f64 {
    let mut best = 0.0f64;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let h = (xs[i] - xs[j]).abs();
            if h > 0.0 {
                best = best.max((values[i] - values[j]).abs() / h.powf(beta));
            }
        }
    }
    best
}

/// Periodic Hölder seminorm on the grid. In 1-d all pairs are scanned; in
/// 2-d pairs with separation up to `MAX_OFFSET_2D` nodes per axis.
pub fn holder_seminorm(f: &GridFunction, beta: f64) -> f64 {
    const MAX_OFFSET_2D: usize = 32;
    let g = f.grid();
    let n = g.points_per_dim();
    let h = g.spacing();
    let v = f.values();
    match g.dim() {
        1 => (1..=n / 2)
            .into_par_iter()
            .map(|s| {
                let d = (s as f64 * h).powf(beta);
                (0..n).map(|i| (v[i] - v[(i + s) % n]).abs()).fold(0.0, f64::max) / d
            })
            .reduce(|| 0.0, f64::max),
        _ => {
            let m = MAX_OFFSET_2D.min(n / 2) as i64;
            let offsets: Vec<(i64, i64)> = (0..=m)
                .flat_map(|a| (-m..=m).map(move |b| (a, b)))
                .filter(|&(a, b)| a > 0 || b > 0)
                .collect();
            offsets
                .par_iter()
                .map(|&(a, b)| {
                    let d = (((a * a + b * b) as f64).sqrt() * h).powf(beta);
                    let mut best = 0.0f64;
                    for i in 0..n {
                        let i2 = (i as i64 + a).rem_euclid(n as i64) as usize;
                        for j in 0..n {
                            let j2 = (j as i64 + b).rem_euclid(n as i64) as usize;
                            best = best.max((v[i * n + j] - v[i2 * n + j2]).abs());
                        }
                    }
                    best / d
                })
                .reduce(|| 0.0, f64::max)
        }
    }
}

/// `||f||_inf + [f]_beta` with the seminorm of [`holder_seminorm`].
pub fn holder_norm(f: &GridFunction, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return param_err(format!("Hölder exponent must lie in (0,1), got {beta}"));
    }
    Ok(f.sup_norm() + holder_seminorm(f, beta))
}

/// `max_i sup |d^k f / dx_i^k|` for `k = 1`, or the largest mixed second
/// derivative for `k = 2`.
pub fn derivative_sup(f: &GridFunction, order: u32) -> f64 {
    let d = f.grid().dim();
    match order {
        1 => (0..d).map(|i| f.derivative(i, 1).sup_norm()).fold(0.0, f64::max),
        _ => {
            let mut best = 0.0f64;
            for i in 0..d {
                best = best.max(f.derivative(i, 2).sup_norm());
                for j in i + 1..d {
                    best = best.max(f.derivative(i, 1).derivative(j, 1).sup_norm());
                }
            }
            best
        }
    }
}

/// Result of [`lp_heat_integral`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HeatBlockIntegral {
    pub j: i32,
    /// Quadrature over `[t_min, T]` plus `t_min ||R_j p(t_min)||_1`.
    pub value: f64,
    pub t_min: f64,
    /// Analytic bound on the part below `t_min`: `t_min ||F^{-1} m_j||_1`.
    pub small_time_bound: f64,
}

/// `int_0^T ||R_j p(t)||_{L^1} dt`, with `R_j p(t)` computed spectrally on
/// the partition's grid (periodized kernel, Fourier coefficients
/// `exp(-t |k|^alpha) / extent^d`).
pub fn lp_heat_integral(j: i32, t_final: f64, table: &KernelTable, part: &DyadicPartition) -> Result<HeatBlockIntegral> {
    const PANEL_NODES: usize = 33;
    let grid = *part.grid();
    let alpha = table.params().alpha();
    if table.params().dim() != grid.dim() {
        return param_err("kernel and grid dimensions differ");
    }
    if !(t_final > 0.0) {
        return param_err(format!("final time must be positive, got {t_final}"));
    }
    let m = part.multiplier(j)?;
    let band = 1.5 * 2f64.powi(j.max(0));
    if grid.nyquist() < band {
        return Err(crate::error::Error::Precondition(format!(
            "grid Nyquist {} cannot resolve block {j} (band edge {band})",
            grid.nyquist()
        )));
    }
    let t_min = (2f64.powf(-alpha * (j as f64 + 2.0)) * 1e-2).min(t_final / 2.0);
    let norms = grid.wavenumber_norms();
    let vol = grid.extent().powi(grid.dim() as i32);
    let l1_at = |t: f64| -> f64 {
        let spec: Vec<Complex64> = norms
            .iter()
            .zip(m)
            .map(|(&k, &w)| Complex64::new(w * (-t * k.powf(alpha)).exp() * grid.len() as f64 / vol, 0.0))
            .collect();
        GridFunction::new_unchecked(grid, inverse_real(&grid, spec)).l1_norm()
    };
    // Panels break at powers of two, so the quadrature over [t_min, T] is
    // shared exactly with any longer horizon.
    let mut breaks = vec![t_min];
    let mut b = 2f64.powi(t_min.log2().floor() as i32 + 1);
    while b < t_final {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(t_final);
    let body: f64 = breaks
        .windows(2)
        .map(|w| {
            let (u0, u1) = (w[0].ln(), w[1].ln());
            let du = (u1 - u0) / (PANEL_NODES - 1) as f64;
            let samples: Vec<f64> = (0..PANEL_NODES)
                .into_par_iter()
                .map(|i| {
                    let t = (u0 + i as f64 * du).exp();
                    l1_at(t) * t
                })
                .collect();
            simpson_uniform(&samples, du)
        })
        .sum();
    let kernel_l1 = {
        let spec: Vec<Complex64> = m.iter().map(|&w| Complex64::new(w * grid.len() as f64 / vol, 0.0)).collect();
        GridFunction::new_unchecked(grid, inverse_real(&grid, spec)).l1_norm()
    };
    Ok(HeatBlockIntegral {
        j,
        value: body + t_min * l1_at(t_min),
        t_min,
        small_time_bound: t_min * kernel_l1,
    })
}

/// Outcome of [`schauder_constant`].
#[derive(Debug, Clone, Serialize)]
pub struct SchauderReport {
    pub alpha: f64,
    pub beta: f64,
    pub t_final: f64,
    pub samples: usize,
    /// `max_n ||u_n||_{L^inf_T B^{alpha+beta}}` over normalized data.
    pub constant: f64,
    pub per_sample: Vec<f64>,
}

/// Random band-limited function: modes up to `2^{j_max - 1}` with Gaussian
/// coefficients decaying like `(1+|k|)^{-decay}`.
pub fn random_band_limited(grid: &TorusGrid, j_max: i32, decay: f64, rng: &mut RngStream) -> GridFunction {
    let kmax = 2f64.powi(j_max - 1);
    let norms = grid.wavenumber_norms();
    let mut spec: Vec<Complex64> = norms
        .iter()
        .map(|&k| {
            if k <= kmax {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Complex64::new(a, b) * (1.0 + k).powf(-decay)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    spec[0] = Complex64::new(spec[0].re, 0.0);
    let vals = inverse_real(grid, spec);
    GridFunction::new_unchecked(*grid, vals)
}

/// Empirical constant of the Schauder estimate for `p = q = inf`:
/// draws `samples` random pairs `(u0, f)` normalized so that
/// `||u0||_{B^{alpha+beta}} = theta` and `sup_t ||f(t)||_{B^beta} = 1 - theta`
/// for a uniform `theta`, with
/// `f(t) = f_a + (t/T) f_b`, solves the nonlocal heat equation and returns
/// the largest `sup_t ||u(t)||_{B^{alpha+beta}}`.
pub fn schauder_constant(
    samples: usize,
    alpha: f64,
    beta: f64,
    t_final: f64,
    part: &DyadicPartition,
    seed: u64,
) -> Result<SchauderReport> {
    const STEPS: usize = 32;
    if samples < 10 {
        return param_err(format!("need at least 10 samples, got {samples}"));
    }
    let grid = *part.grid();
    let inf = Exponent::Infinity;
    let per_sample = (0..samples)
        .into_par_iter()
        .map(|n| -> Result<f64> {
            let mut rng = RngStream::new(seed, stream_id(StreamDomain::Schauder, n as u64));
            let theta: f64 = rng.random();
            let decay_u = rng.random_range(0.0..alpha + beta + 1.0);
            let decay_f = rng.random_range(0.0..beta + 1.0);
            let u0 = random_band_limited(&grid, part.j_max(), decay_u, &mut rng);
            let fa = random_band_limited(&grid, part.j_max(), decay_f, &mut rng);
            let fb = random_band_limited(&grid, part.j_max(), decay_f, &mut rng);
            let h = t_final / STEPS as f64;
            let mut source: Vec<GridFunction> = (0..=STEPS)
                .map(|i| {
                    let mut f = fa.clone();
                    f.axpy(i as f64 * h / t_final, &fb);
                    f
                })
                .collect();
            let u_norm = besov_norm(&u0, alpha + beta, inf, inf, part)?.total;
            let mut f_norm = 0.0f64;
            for f in &source {
                f_norm = f_norm.max(besov_norm(f, beta, inf, inf, part)?.total);
            }
            let u0 = u0.scaled(theta / u_norm);
            for f in source.iter_mut() {
                *f = f.scaled((1.0 - theta) / f_norm);
            }
            let path = heat_propagate(&u0, &source, alpha, t_final, STEPS)?;
            let mut sup = 0.0f64;
            for u in &path {
                sup = sup.max(besov_norm(u, alpha + beta, inf, inf, part)?.total);
            }
            Ok(sup)
        })
        .collect::<Result<Vec<f64>>>()?;
    let constant = per_sample.iter().cloned().fold(0.0, f64::max);
    Ok(SchauderReport {
        alpha,
        beta,
        t_final,
        samples,
        constant,
        per_sample,
    })
}
