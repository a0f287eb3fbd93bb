use rayon::prelude::*;
use serde::Serialize;

use super::table::{rho_radial, KernelTable};
use crate::besov::{frac_laplacian, GridFunction, TorusGrid};
use crate::error::{param_err, Error, Result};

/// Empirical constant of a Hölder-type inequality for one exponent.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HolderConstant {
    pub beta: f64,
    pub constant: f64,
}

/// Extremal ratios of the kernel against the reference bounds over a grid.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// min and max of `p / rho`.
    pub two_sided_min: f64,
    pub two_sided_max: f64,
    /// max of `|grad p| t^{1/alpha} / rho`.
    pub gradient_max: f64,
    /// max of `rho(t, x+z) / rho(t, x)` with `|z| <= max(2 t^{1/alpha}, |x|/2)`.
    pub doubling_max: f64,
    /// max of `|p(t,x1) - p(t,x2)| / (|x1-x2|^b t^{-b/alpha} (p(t,x1) + p(t,x2)))`.
    pub space_holder: Vec<HolderConstant>,
    /// max of `|p(t1,x) - p(t2,x)| / (|t2-t1|^{b/alpha} (t1^{-b/alpha} p(t1,x) + t2^{-b/alpha} p(t2,x)))`.
    pub time_holder: Vec<HolderConstant>,
    /// max of `|Delta^{alpha/2} p| t / p`, using `Delta^{alpha/2} p = d/dt p`.
    pub frac_laplacian_max: f64,
    pub pairs_checked: usize,
}

const SPACE_BETAS: [f64; 3] = [0.25, 0.5, 0.75];
const TIME_BETAS: [f64; 2] = [0.5, 1.0];
const DOUBLING_STEPS: usize = 25;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Evaluates every bound over `t_grid x x_grid` and returns the empirical
/// extremal constants. Spatial Hölder quotients use all pairs of `x_grid` at
/// each time; time Hölder quotients all pairs of `t_grid` at each point.
pub fn kernel_bound_report(table: &KernelTable, t_grid: &[f64], x_grid: &[Vec<f64>]) -> Result<BoundReport> {
    if t_grid.is_empty() || x_grid.is_empty() {
        return param_err("bound report needs non-empty grids");
    }
    let params = *table.params();
    let a = params.alpha();
    let d = params.dim();
    if let Some(t) = t_grid.iter().find(|t| !(**t > 0.0)) {
        return param_err(format!("times must be positive, got {t}"));
    }
    if let Some(x) = x_grid.iter().find(|x| x.len() != d) {
        return param_err(format!("point {x:?} does not have dimension {d}"));
    }
    let radii: Vec<f64> = x_grid.iter().map(|x| norm(x)).collect();

    let per_time: Vec<_> = t_grid
        .par_iter()
        .map(|&t| {
            let scale = t.powf(1.0 / a);
            let p: Vec<f64> = radii.iter().map(|&r| table.density_radial(t, r)).collect();
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            let mut grad = 0.0f64;
            let mut lap = 0.0f64;
            let mut dbl = 0.0f64;
            for (i, &r) in radii.iter().enumerate() {
                let rho = rho_radial(t, r, &params);
                let q = p[i] / rho;
                lo = lo.min(q);
                hi = hi.max(q);
                grad = grad.max(table.radial_derivative(t, r).abs() * scale / rho);
                lap = lap.max(table.time_derivative(t, r).abs() * t / p[i]);
                let zmax = (2.0 * scale).max(r / 2.0);
                let x = &x_grid[i];
                for k in 0..=DOUBLING_STEPS {
                    let f = -1.0 + 2.0 * k as f64 / DOUBLING_STEPS as f64;
                    // shifts along the first axis and, in d > 1, along the second
                    for axis in 0..d.min(2) {
                        let mut y = x.clone();
                        y[axis] += f * zmax;
                        dbl = dbl.max(rho_radial(t, norm(&y), &params) / rho);
                    }
                }
            }
            let mut holder = [0.0f64; 3];
            for i in 0..x_grid.len() {
                for j in i + 1..x_grid.len() {
                    let h = dist(&x_grid[i], &x_grid[j]);
                    if h == 0.0 {
                        continue;
                    }
                    let num = (p[i] - p[j]).abs();
                    let den = p[i] + p[j];
                    for (c, b) in holder.iter_mut().zip(SPACE_BETAS) {
                        *c = c.max(num / ((h / scale).powf(b) * den));
                    }
                }
            }
            (lo, hi, grad, lap, dbl, holder, p)
        })
        .collect();

    let mut r = BoundReport {
        two_sided_min: f64::INFINITY,
        two_sided_max: 0.0,
        gradient_max: 0.0,
        doubling_max: 0.0,
        space_holder: SPACE_BETAS.iter().map(|&beta| HolderConstant { beta, constant: 0.0 }).collect(),
        time_holder: TIME_BETAS.iter().map(|&beta| HolderConstant { beta, constant: 0.0 }).collect(),
        frac_laplacian_max: 0.0,
        pairs_checked: t_grid.len() * x_grid.len() * (x_grid.len() - 1) / 2,
    };
    for (lo, hi, grad, lap, dbl, holder, _) in &per_time {
        r.two_sided_min = r.two_sided_min.min(*lo);
        r.two_sided_max = r.two_sided_max.max(*hi);
        r.gradient_max = r.gradient_max.max(*grad);
        r.frac_laplacian_max = r.frac_laplacian_max.max(*lap);
        r.doubling_max = r.doubling_max.max(*dbl);
        for (c, h) in r.space_holder.iter_mut().zip(holder) {
            c.constant = c.constant.max(*h);
        }
    }
    for i in 0..t_grid.len() {
        for j in i + 1..t_grid.len() {
            let (t1, t2) = (t_grid[i], t_grid[j]);
            let dt = (t2 - t1).abs();
            if dt == 0.0 {
                continue;
            }
            let (p1, p2) = (&per_time[i].6, &per_time[j].6);
            for c in r.time_holder.iter_mut() {
                let b = c.beta;
                for k in 0..x_grid.len() {
                    let den = dt.powf(b / a) * (t1.powf(-b / a) * p1[k] + t2.powf(-b / a) * p2[k]);
                    c.constant = c.constant.max((p1[k] - p2[k]).abs() / den);
                }
            }
        }
    }
    r.pairs_checked += x_grid.len() * t_grid.len() * (t_grid.len() - 1) / 2;
    let all = [r.two_sided_max, r.gradient_max, r.doubling_max, r.frac_laplacian_max];
    if !(r.two_sided_min > 0.0) || all.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diagnostic(format!("bound constants not finite: {r:?}")));
    }
    Ok(r)
}

/// L1 distance on the line grid `[-half_width, half_width]` (step `step`)
/// between the discrete convolution `p(s) * p(t)` and `p(s + t)`.
/// One-dimensional tables only.
pub fn ck_defect(table: &KernelTable, s: f64, t: f64, half_width: f64, step: f64) -> Result<f64> {
    if !(s > 0.0 && t > 0.0) {
        return param_err(format!("times must be positive, got s={s}, t={t}"));
    }
    if table.params().dim() != 1 {
        return param_err("the Chapman-Kolmogorov check is one-dimensional");
    }
    if !(step > 0.0 && half_width > step) {
        return param_err(format!("bad grid: half width {half_width}, step {step}"));
    }
    let a = table.params().alpha();
    let needed = s.min(t).powf(1.0 / a) / 4.0;
    if step > needed * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "grid step {step} does not resolve the kernels (need <= {needed})"
        )));
    }
    // convolution is symmetric; fixing the order makes the result exactly so
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    let n = (half_width / step).round() as usize;
    let m = 2 * n + 1;
    let x = |i: usize| (i as f64 - n as f64) * step;
    let ps: Vec<f64> = (0..m).map(|i| table.density_radial(s, x(i).abs())).collect();
    // p(t) on the doubled grid so that x_k - x_j stays tabulated
    let pt: Vec<f64> = (0..2 * m - 1)
        .map(|i| table.density_radial(t, ((i as f64 - (m - 1) as f64) * step).abs()))
        .collect();
    let terms: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|k| {
            let conv: f64 = (0..m).map(|j| ps[j] * pt[k + m - 1 - j]).sum::<f64>() * step;
            (conv - table.density_radial(s + t, x(k).abs())).abs()
        })
        .collect();
    let defect: f64 = terms.iter().sum();
    Ok(defect * step)
}

/// `max |d/dt p - Delta^{alpha/2} p| / max |d/dt p|` at time `t` on the
/// torus of side `extent` with `points` nodes per axis. The kernel is
/// periodized over neighbouring cells, the fractional Laplacian is spectral
/// and the time derivative a centered difference with step `1e-3 t`.
pub fn heat_equation_residual(table: &KernelTable, t: f64, extent: f64, points: usize) -> Result<f64> {
    if !(t > 0.0) {
        return param_err(format!("time must be positive, got {t}"));
    }
    let d = table.params().dim();
    let grid = TorusGrid::new(extent, points, d)?;
    let origin = vec![0.0; d];
    let periodized = |time: f64| periodized_kernel(table, time, &grid, &origin);
    let dt = 1e-3 * t;
    let p = periodized(t);
    let plus = periodized(t + dt);
    let minus = periodized(t - dt);
    let lap = frac_laplacian(&p, table.params().alpha())?;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..p.values().len() {
        let dp = (plus.values()[i] - minus.values()[i]) / (2.0 * dt);
        num = num.max((dp - lap.values()[i]).abs());
        den = den.max(dp.abs());
    }
    Ok(num / den)
}

/// `sum_n p(t, x - center + n extent)` on the grid: the heat kernel of the
/// torus. Images are summed over `|n_i| <= 64` in 1-d, `<= 2` in 2-d.
pub fn periodized_kernel(table: &KernelTable, t: f64, grid: &TorusGrid, center: &[f64]) -> GridFunction {
    let d = grid.dim();
    let extent = grid.extent();
    let images: i64 = if d == 1 { 64 } else { 2 };
    GridFunction::from_fn(grid, |x| {
        let mut acc = 0.0;
        let mut shift = vec![-images; d];
        loop {
            let r2: f64 = x
                .iter()
                .zip(center)
                .zip(&shift)
                .map(|((xi, c), k)| (xi - c + *k as f64 * extent).powi(2))
                .sum();
            acc += table.density_radial(t, r2.sqrt());
            let mut axis = 0;
            loop {
                if axis == d {
                    return acc;
                }
                shift[axis] += 1;
                if shift[axis] <= images {
                    break;
                }
                shift[axis] = -images;
                axis += 1;
            }
        }
    })
}
