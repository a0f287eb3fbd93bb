use rayon::prelude::*;
use std::f64::consts::PI;

use super::{Bandwidth, ParticleEnsemble};
use crate::besov::{forward, inverse_real, GridFunction, TorusGrid};
use crate::error::{param_err, Error, Result};

/// Bandwidth used when the Silverman scale degenerates.
pub const MIN_BANDWIDTH: f64 = 1e-3;

fn quantile_spread(mut xs: Vec<f64>) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    let i1 = n / 4;
    let i3 = (3 * n / 4).min(n - 1);
    let q1 = *xs.select_nth_unstable_by(i1, f64::total_cmp).1;
    let q3 = *xs.select_nth_unstable_by(i3, f64::total_cmp).1;
    (var.sqrt(), q3 - q1)
}

/// Resolves the bandwidth rule on the ensemble.
pub fn resolve_bandwidth(ens: &ParticleEnsemble, rule: Bandwidth) -> Result<f64> {
    match rule {
        Bandwidth::Fixed(w) if w > 0.0 && w.is_finite() => Ok(w),
        Bandwidth::Fixed(w) => param_err(format!("bandwidth must be positive, got {w}")),
        Bandwidth::Silverman => {
            if ens.is_empty() {
                return param_err("empty ensemble");
            }
            let d = ens.dim();
            let n = ens.len();
            let mut sigma = 0.0;
            for k in 0..d {
                let xs: Vec<f64> = ens.positions().iter().skip(k).step_by(d).copied().collect();
                let (sd, iqr) = quantile_spread(xs);
                // heavy tails make sd useless; the IQR carries the scale
                sigma += if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
            }
            sigma /= d as f64;
            let w = 1.06 * sigma * (n as f64).powf(-1.0 / (d as f64 + 4.0));
            if w > 0.0 && w.is_finite() {
                Ok(w)
            } else {
                log::warn!("degenerate ensemble, falling back to bandwidth {MIN_BANDWIDTH}");
                Ok(MIN_BANDWIDTH)
            }
        }
    }
}

const BIN_BLOCK: usize = 16_384;

/// Linear (cloud-in-cell) binning of `weights[i] * delta_{x_i}` onto the grid,
/// as a density (mass over cell volume). Points outside the box are dropped.
/// Returns the binned field and the total weight kept.
pub fn bin_weighted(grid: &TorusGrid, positions: &[f64], weights: Option<&[f64]>) -> (Vec<f64>, f64) {
    let d = grid.dim();
    let n = grid.points_per_dim();
    let h = grid.spacing();
    let half = 0.5 * grid.extent();
    let len = grid.len();
    // fixed blocks summed in order, so the result does not depend on the thread count
    let partial: Vec<(Vec<f64>, f64)> = positions
        .par_chunks(BIN_BLOCK * d)
        .enumerate()
        .map(|(blk, xs)| {
            let mut acc = vec![0.0; len];
            let mut kept = 0.0;
            for (off, x) in xs.chunks(d).enumerate() {
                if !x.iter().all(|v| *v >= -half && *v < half) {
                    continue;
                }
                let wt = weights.map_or(1.0, |w| w[blk * BIN_BLOCK + off]);
                let mut idx = [0usize; 2];
                let mut frac = [0.0; 2];
                for k in 0..d {
                    let s = (x[k] + half) / h;
                    let j = s.floor();
                    idx[k] = (j as usize).min(n - 1);
                    frac[k] = s - j;
                }
                if d == 1 {
                    acc[idx[0]] += wt * (1.0 - frac[0]);
                    acc[(idx[0] + 1) % n] += wt * frac[0];
                } else {
                    let (i0, j0) = (idx[0], idx[1]);
                    let (i1, j1) = ((i0 + 1) % n, (j0 + 1) % n);
                    let (fx, fy) = (frac[0], frac[1]);
                    acc[i0 * n + j0] += wt * (1.0 - fx) * (1.0 - fy);
                    acc[i0 * n + j1] += wt * (1.0 - fx) * fy;
                    acc[i1 * n + j0] += wt * fx * (1.0 - fy);
                    acc[i1 * n + j1] += wt * fx * fy;
                }
                kept += wt;
            }
            (acc, kept)
        })
        .collect();
    let mut hist = vec![0.0; len];
    let mut kept = 0.0;
    for (acc, k) in &partial {
        for (x, y) in hist.iter_mut().zip(acc) {
            *x += y;
        }
        kept += k;
    }
    let vol = grid.cell_volume();
    for v in hist.iter_mut() {
        *v /= vol;
    }
    (hist, kept)
}

/// Convolution of a grid field with the Gaussian of standard deviation `w`,
/// applied as the exact Fourier multiplier `exp(-w^2 |k|^2 / 2)`.
fn gaussian_smooth(grid: &TorusGrid, values: &[f64], w: f64) -> Vec<f64> {
    let k = grid.wavenumber_norms();
    let spec: Vec<_> = forward(grid, values)
        .into_iter()
        .zip(&k)
        .map(|(z, k)| z * (-0.5 * (w * k).powi(2)).exp())
        .collect();
    inverse_real(grid, spec)
}

/// Gaussian kernel density estimate of the ensemble on the grid, with the
/// particles linearly binned to the nodes first. Normalized to unit mass over
/// the nodes; particles outside the box are not counted.
pub fn kde_estimate(ens: &ParticleEnsemble, grid: &TorusGrid, rule: Bandwidth) -> Result<GridFunction> {
    let w = resolve_bandwidth(ens, rule)?;
    kde_with_bandwidth(ens, grid, w)
}

pub fn kde_with_bandwidth(ens: &ParticleEnsemble, grid: &TorusGrid, w: f64) -> Result<GridFunction> {
    if ens.dim() != grid.dim() {
        return param_err(format!("ensemble is {}-d, grid is {}-d", ens.dim(), grid.dim()));
    }
    let (hist, kept) = bin_weighted(grid, ens.positions(), None);
    if kept == 0.0 {
        return Err(Error::DomainSize("no particle lies inside the estimation grid".into()));
    }
    let mut v = gaussian_smooth(grid, &hist, w);
    for x in v.iter_mut() {
        *x = x.max(0.0);
    }
    let mass: f64 = v.iter().sum::<f64>() * grid.cell_volume();
    for x in v.iter_mut() {
        *x /= mass;
    }
    GridFunction::new(*grid, v)
}

/// `2 n^{-1/2} (2 sqrt(pi) w)^{-d/2} int sqrt(f)`: twice the leading-order
/// mean L1 fluctuation of a Gaussian estimate of `f` from `n` samples.
pub fn kde_noise_band(f: &GridFunction, n: usize, w: f64) -> f64 {
    let d = f.grid().dim() as f64;
    let root: f64 = f.values().iter().map(|v| v.max(0.0).sqrt()).sum::<f64>() * f.grid().cell_volume();
    2.0 / (n as f64).sqrt() * (2.0 * PI.sqrt() * w).powf(-d / 2.0) * root
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamDomain;

    #[test]
    fn single_particle_gives_a_gaussian_bump() {
        let grid = TorusGrid::new(20.0, 1024, 1).unwrap();
        let x0 = 0.3;
        let ens = ParticleEnsemble::at_point(&[x0], 1, 1, StreamDomain::Generic).unwrap();
        let w = 0.5;
        let f = kde_estimate(&ens, &grid, Bandwidth::Fixed(w)).unwrap();
        assert!((f.integral() - 1.0).abs() < 1e-12);
        let g = GridFunction::from_fn(&grid, |x| (-(x[0] - x0).powi(2) / (2.0 * w * w)).exp() / (w * (2.0 * PI).sqrt()));
        // linear binning smears the point over two nodes: O(h^2) from the exact bump
        assert!(f.sub(&g).l1_norm() < 1e-3);
        let peak = f.values().iter().cloned().fold(0.0, f64::max);
        let at = f.values().iter().position(|v| *v == peak).unwrap();
        assert!((grid.coordinate(at) - x0).abs() <= grid.spacing());
    }

    #[test]
    fn degenerate_ensemble_falls_back() {
        let ens = ParticleEnsemble::at_point(&[1.0], 2000, 1, StreamDomain::Generic).unwrap();
        assert_eq!(resolve_bandwidth(&ens, Bandwidth::Silverman).unwrap(), MIN_BANDWIDTH);
    }

    #[test]
    fn binning_dropped_outside() {
        let grid = TorusGrid::new(10.0, 256, 1).unwrap();
        let (hist, kept) = bin_weighted(&grid, &[0.0, 7.0, -5.0, 4.99], None);
        assert_eq!(kept, 3.0);
        assert!((hist.iter().sum::<f64>() * grid.cell_volume() - 3.0).abs() < 1e-12);
    }
}
