use rustfft::num_complex::Complex64;

use super::kde::bin_weighted;
use super::scheme::{run_euler, snapshot_value};
use super::{EulerConfig, ParticleEnsemble};
use crate::besov::{forward, inverse_real, GridFunction, TorusGrid};
use crate::error::{param_err, Result};
use crate::fokker_planck::DensityFlow;
use crate::rng::StreamDomain;
use crate::stable::KernelTable;

/// Sub-intervals per Euler step on which the path is held constant inside
/// the time integral.
pub const SUBSTEPS: usize = 8;

/// Monte-Carlo estimate of the density at time `t` of the Euler scheme
/// started at `x0`,
/// `p(t, y) = p_a(t, x0 - y) + int_0^t E[b_s . grad p_a(t - s, X_s - y)] ds`,
/// where `b_s = 1_{s >= h} b(X_{kh}, rho_kh(X_kh))` and `rho_kh` are the density
/// estimates of the mixture run of `config` (computed here when the drift
/// depends on the density).
pub fn duhamel_density_mc(
    x0: &[f64],
    t: f64,
    config: &EulerConfig,
    paths: usize,
    grid: &TorusGrid,
    table: &KernelTable,
) -> Result<GridFunction> {
    config.validate()?;
    let run;
    let snapshots = if config.drift.is_zero() || config.drift.is_density_independent() {
        None
    } else {
        run = run_euler(config, grid)?;
        Some(&run.flow)
    };
    duhamel_density_with(x0, t, config, paths, grid, table, snapshots)
}

/// [`duhamel_density_mc`] with the density estimates supplied. `snapshots`
/// may be `None` only for drifts that ignore the density.
///
/// The path is advanced in [`SUBSTEPS`] pieces per step and held constant on
/// each; the weight `int grad p_a(t - s) ds` over every piece is integrated
/// exactly in Fourier space, `(e^{-t_lo |k|^a} - e^{-t_hi |k|^a}) / |k|^a`,
/// which absorbs the `(t - s)^{-1/a}` singularity of the last piece.
pub fn duhamel_density_with(
    x0: &[f64],
    t: f64,
    config: &EulerConfig,
    paths: usize,
    grid: &TorusGrid,
    table: &KernelTable,
    snapshots: Option<&DensityFlow>,
) -> Result<GridFunction> {
    let d = config.dim;
    if x0.len() != d || grid.dim() != d || table.params().dim() != d {
        return param_err("start point, grid, table and config must share the dimension");
    }
    if (table.params().alpha() - config.alpha).abs() > 1e-12 {
        return param_err("kernel table and config disagree on alpha");
    }
    if !(t > 0.0 && t <= config.t_final * (1.0 + 1e-12)) {
        return param_err(format!("t must lie in (0, T], got {t}"));
    }
    if paths < 1000 {
        return param_err(format!("need at least 1000 paths, got {paths}"));
    }
    let needs_density = !(config.drift.is_zero() || config.drift.is_density_independent());
    if needs_density && snapshots.is_none() {
        return param_err("density-dependent drift needs the density estimates");
    }
    let h = config.step();
    let alpha = config.alpha;
    let free = GridFunction::from_fn(grid, |y| {
        let r = y.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        table.density_radial(t, r)
    });
    if config.drift.is_zero() {
        return Ok(free);
    }

    let kn = grid.wavenumber_norms();
    let n = grid.points_per_dim();
    let axis_k = |idx: usize, a: usize| -> f64 {
        let m = if d == 1 { idx } else if a == 0 { idx / n } else { idx % n };
        if m == n / 2 {
            0.0
        } else {
            grid.wavenumber(m)
        }
    };
    let kalpha: Vec<f64> = kn.iter().map(|k| k.powf(alpha)).collect();
    let weight = |idx: usize, lo: f64, hi: f64| -> f64 {
        let ka = kalpha[idx];
        if ka * (hi - lo) < 1e-8 {
            (hi - lo) * (-ka * lo).exp()
        } else {
            ((-ka * lo).exp() - (-ka * hi).exp()) / ka
        }
    };

    let mut ens = ParticleEnsemble::at_point(x0, paths, config.seed, StreamDomain::DuhamelPaths)?;
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut coeff = vec![0.0; paths * d];
    let dt = h / SUBSTEPS as f64;
    let mut k = 0usize;
    let mut s = 0.0;
    while s < t * (1.0 - 1e-12) {
        if k >= 1 {
            let rho = match snapshots {
                Some(f) => {
                    let i = f.index_of(k as f64 * h);
                    if f.grid != *grid || (f.times[i] - k as f64 * h).abs() > 1e-9 * h {
                        return param_err(format!("no density estimate at t = {}", k as f64 * h));
                    }
                    Some(&f.densities[i])
                }
                None => None,
            };
            for (p, c) in coeff.chunks_mut(d).enumerate() {
                let x = ens.position(p);
                let u = rho.map_or(0.0, |r| snapshot_value(r, x));
                config.drift.eval(x, u, c);
            }
        }
        for _ in 0..SUBSTEPS {
            if s >= t * (1.0 - 1e-12) {
                break;
            }
            let s_next = (s + dt).min(t);
            if k >= 1 {
                let (lo, hi) = (t - s_next, t - s);
                for a in 0..d {
                    let w: Vec<f64> = coeff.iter().skip(a).step_by(d).map(|b| b / paths as f64).collect();
                    let (field, _) = bin_weighted(grid, ens.positions(), Some(&w));
                    let spec = forward(grid, &field);
                    for (idx, z) in spec.into_iter().enumerate() {
                        // - d/dy_a of the smoothed measure
                        acc[idx] += z * Complex64::new(0.0, -axis_k(idx, a)) * weight(idx, lo, hi);
                    }
                }
            }
            let c = &coeff;
            let step = s_next - s;
            if k >= 1 {
                ens.advance(step, alpha, Some(|i: usize, _: &[f64], out: &mut [f64]| {
                    for (o, b) in out.iter_mut().zip(&c[i * d..(i + 1) * d]) {
                        *o = b * step;
                    }
                }));
            } else {
                ens.advance(step, alpha, None::<fn(usize, &[f64], &mut [f64])>);
            }
            s = s_next;
        }
        k += 1;
    }
    let correction = inverse_real(grid, acc);
    let mut out = free;
    for (v, c) in out.values_mut().iter_mut().zip(correction) {
        *v += c;
    }
    Ok(out)
}
