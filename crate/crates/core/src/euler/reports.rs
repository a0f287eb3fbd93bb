use serde::Serialize;

use super::kde::kde_noise_band;
use super::scheme::{run_euler, EulerRun};
use super::EulerConfig;
use crate::besov::{forward, inverse_real, GridFunction, TorusGrid};
use crate::error::{param_err, Error, Result};
use crate::fokker_planck::{DensityFlow, InitialDensity};
use crate::stable::KernelTable;

/// `int p_a(t, x - y) mu_0(dx)` on the grid: the initial density sampled on
/// the grid, convolved with the kernel by a zero-padded FFT so that no
/// periodic images enter.
pub fn mixture_kernel(initial: &InitialDensity, t: f64, grid: &TorusGrid, table: &KernelTable) -> Result<GridFunction> {
    if !(t > 0.0) {
        return param_err(format!("time must be positive, got {t}"));
    }
    let d = grid.dim();
    let n = grid.points_per_dim();
    let h = grid.spacing();
    let padded = TorusGrid::new(2.0 * grid.extent(), 2 * n, d)?;
    let rho0 = initial.on_grid(grid)?;
    let m = 2 * n;
    let mut a = vec![0.0; padded.len()];
    let mut kern = vec![0.0; padded.len()];
    let offset = |j: usize| if j < n { j as f64 * h } else { (j as f64 - m as f64) * h };
    match d {
        1 => {
            a[..n].copy_from_slice(rho0.values());
            for (j, v) in kern.iter_mut().enumerate() {
                *v = table.density_radial(t, offset(j).abs());
            }
        }
        _ => {
            for i in 0..n {
                a[i * m..i * m + n].copy_from_slice(&rho0.values()[i * n..(i + 1) * n]);
            }
            for i in 0..m {
                for j in 0..m {
                    kern[i * m + j] = table.density_radial(t, offset(i).hypot(offset(j)));
                }
            }
        }
    }
    let fa = forward(&padded, &a);
    let fk = forward(&padded, &kern);
    let conv = inverse_real(&padded, fa.into_iter().zip(fk).map(|(x, y)| x * y).collect());
    let vol = grid.cell_volume();
    let values: Vec<f64> = match d {
        1 => conv[..n].iter().map(|v| (v * vol).max(0.0)).collect(),
        _ => (0..n)
            .flat_map(|i| conv[i * m..i * m + n].iter().map(|v| (v * vol).max(0.0)).collect::<Vec<_>>())
            .collect(),
    };
    GridFunction::new(*grid, values)
}

/// Where the density-to-kernel quotients are taken.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolvedRegion {
    /// Nodes with `q(t, y) < relative_floor * max_y q(t, y)` are skipped:
    /// there the estimate is dominated by sampling noise.
    pub relative_floor: f64,
}

impl Default for ResolvedRegion {
    fn default() -> Self {
        Self { relative_floor: 2e-2 }
    }
}

fn resolved_nodes(q: &GridFunction, region: ResolvedRegion) -> Vec<bool> {
    let grid = q.grid();
    let quarter = 0.25 * grid.extent();
    let floor = region.relative_floor * q.sup_norm();
    (0..grid.len())
        .map(|i| q.values()[i] >= floor && q.values()[i] > 0.0 && grid.point(i).iter().all(|x| x.abs() <= quarter))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub times: Vec<f64>,
    /// `C(t) = max_y rho_t(y) / int p_a(t, x - y) mu_0(dx)` over resolved nodes.
    pub constants: Vec<f64>,
    pub sup: f64,
}

/// Empirical constant of the domination `rho_t <= C int p_a(t, . - x) mu_0(dx)`
/// at every positive saved time.
pub fn domination_report(
    flow: &DensityFlow,
    initial: &InitialDensity,
    table: &KernelTable,
    region: ResolvedRegion,
) -> Result<DominationReport> {
    let mut r = DominationReport {
        times: Vec::new(),
        constants: Vec::new(),
        sup: 0.0,
    };
    for (t, rho) in flow.times.iter().zip(&flow.densities) {
        if *t <= 0.0 {
            continue;
        }
        let q = mixture_kernel(initial, *t, &flow.grid, table)?;
        let mask = resolved_nodes(&q, region);
        let c = (0..mask.len())
            .filter(|&i| mask[i])
            .map(|i| rho.values()[i] / q.values()[i])
            .fold(0.0, f64::max);
        r.times.push(*t);
        r.constants.push(c);
        r.sup = r.sup.max(c);
    }
    if !r.sup.is_finite() {
        return Err(Error::Diagnostic("domination constant is not finite".into()));
    }
    Ok(r)
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    pub beta: f64,
    /// sup of `|rho_t(y1) - rho_t(y2)| t^{b/a} / (|y1 - y2|^b (q(t,y1) + q(t,y2)))`.
    pub space: f64,
    /// sup of `|rho_t1(y) - rho_t2(y)| / (|t1 - t2|^{b/a} (t1^{-b/a} q(t1,y) + t2^{-b/a} q(t2,y)))`.
    pub time: f64,
    pub pairs: usize,
}

/// Hölder constants of the flow relative to the mixture kernel `q`. Spatial
/// pairs are `(y, y + 2^j h e_axis)` with `2^j h <= t^{1/a}` for every resolved
/// node `y`; time pairs are the pairs of positive saved times with
/// `t2 - t1 <= t1`, at every node resolved at both. Outside these ranges the
/// inequalities follow from the domination bound alone.
pub fn holder_report(
    flow: &DensityFlow,
    initial: &InitialDensity,
    table: &KernelTable,
    beta: f64,
    region: ResolvedRegion,
) -> Result<HolderReport> {
    let a = flow.alpha;
    if !(beta > 0.0 && beta < a - 1.0) {
        return param_err(format!("beta must lie in (0, {}), got {beta}", a - 1.0));
    }
    let grid = flow.grid;
    let n = grid.points_per_dim();
    let d = grid.dim();
    let h = grid.spacing();
    let idx: Vec<usize> = (0..flow.len()).filter(|&k| flow.times[k] > 0.0).collect();
    let qs: Vec<GridFunction> = idx
        .iter()
        .map(|&k| mixture_kernel(initial, flow.times[k], &grid, table))
        .collect::<Result<_>>()?;
    let masks: Vec<Vec<bool>> = qs.iter().map(|q| resolved_nodes(q, region)).collect();
    let mut r = HolderReport {
        beta,
        space: 0.0,
        time: 0.0,
        pairs: 0,
    };
    for (s, &k) in idx.iter().enumerate() {
        let t = flow.times[k];
        let (rho, q, mask) = (flow.densities[k].values(), qs[s].values(), &masks[s]);
        for i in 0..grid.len() {
            if !mask[i] {
                continue;
            }
            for axis in 0..d {
                let mut step = 1usize;
                let reach = t.powf(1.0 / a);
                while step < n / 4 && step as f64 * h <= reach {
                    let j = if d == 1 {
                        (i + step) % n
                    } else if axis == 0 {
                        ((i / n + step) % n) * n + i % n
                    } else {
                        (i / n) * n + (i % n + step) % n
                    };
                    if mask[j] {
                        let dist = step as f64 * h;
                        let v = (rho[i] - rho[j]).abs() * t.powf(beta / a) / (dist.powf(beta) * (q[i] + q[j]));
                        r.space = r.space.max(v);
                        r.pairs += 1;
                    }
                    step *= 2;
                }
            }
        }
    }
    for s1 in 0..idx.len() {
        for s2 in s1 + 1..idx.len() {
            let (t1, t2) = (flow.times[idx[s1]], flow.times[idx[s2]]);
            if t2 - t1 > t1 {
                continue;
            }
            let (r1, r2) = (flow.densities[idx[s1]].values(), flow.densities[idx[s2]].values());
            let (q1, q2) = (qs[s1].values(), qs[s2].values());
            let gap = (t2 - t1).abs().powf(beta / a);
            let (w1, w2) = (t1.powf(-beta / a), t2.powf(-beta / a));
            for i in 0..grid.len() {
                if masks[s1][i] && masks[s2][i] {
                    let v = (r1[i] - r2[i]).abs() / (gap * (w1 * q1[i] + w2 * q2[i]));
                    r.time = r.time.max(v);
                    r.pairs += 1;
                }
            }
        }
    }
    if !(r.space.is_finite() && r.time.is_finite()) {
        return Err(Error::Diagnostic(format!("Hölder constants not finite: {r:?}")));
    }
    Ok(r)
}

/// One row of a convergence table.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n_steps: usize,
    pub n_particles: usize,
    pub times: Vec<f64>,
    /// `e(t) = ||rho^N_t - rho^ref_t||_1` at every `kh >= h`.
    pub errors: Vec<f64>,
    /// `e(T)`.
    pub final_error: f64,
    /// Trapezoid rule for `int_h^T e(t) dt`.
    pub integrated_error: f64,
    pub max_error: f64,
    /// [`kde_noise_band`] of the reference at `T` for this row's `n` and final bandwidth.
    pub noise_band: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Row pairs `(i, j)` with `(N_j, n_j) >= (N_i, n_i)` where `e_j(T)` or
    /// `E_j` exceeds row `i`'s value by more than row `i`'s noise band.
    pub violations: Vec<(usize, usize)>,
}

impl ConvergenceTable {
    pub fn check(&self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Diagnostic(format!("errors increase along the family: {:?}", self.violations)))
        }
    }
}

fn same_family(a: &EulerConfig, b: &EulerConfig) -> bool {
    a.alpha == b.alpha && a.dim == b.dim && a.drift == b.drift && a.initial == b.initial && a.t_final == b.t_final
}

fn errors_against(run: &EulerRun, reference: &DensityFlow) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = run.flow.times.get(1).copied().unwrap_or(0.0) - run.flow.times[0];
    let mut ts = Vec::new();
    let mut es = Vec::new();
    for (t, rho) in run.flow.times.iter().zip(&run.flow.densities) {
        if *t < h * (1.0 - 1e-9) {
            continue;
        }
        let i = reference.index_of(*t);
        if (reference.times[i] - t).abs() > 1e-9 * (1.0 + t) {
            return param_err(format!("reference has no density at t = {t}"));
        }
        ts.push(*t);
        es.push(rho.sub(&reference.densities[i]).l1_norm());
    }
    Ok((ts, es))
}

fn trapezoid(ts: &[f64], es: &[f64]) -> f64 {
    ts.windows(2).zip(es.windows(2)).map(|(t, e)| 0.5 * (t[1] - t[0]) * (e[0] + e[1])).sum()
}

/// Row of [`ConvergenceTable`] from a finished run.
pub fn convergence_row(config: &EulerConfig, run: &EulerRun, reference: &DensityFlow) -> Result<ConvergenceRow> {
    if reference.grid != run.flow.grid {
        return param_err("reference and run use different grids");
    }
    let (times, errors) = errors_against(run, reference)?;
    let final_error = *errors.last().unwrap();
    let integrated_error = trapezoid(&times, &errors);
    let max_error = errors.iter().cloned().fold(0.0, f64::max);
    let i = reference.index_of(config.t_final);
    let noise_band = kde_noise_band(&reference.densities[i], config.n_particles, *run.bandwidths.last().unwrap());
    Ok(ConvergenceRow {
        n_steps: config.n_steps,
        n_particles: config.n_particles,
        times,
        errors,
        final_error,
        integrated_error,
        max_error,
        noise_band,
    })
}

/// Runs every configuration and tabulates its error against the reference.
pub fn convergence_study(configs: &[EulerConfig], reference: &DensityFlow, grid: &TorusGrid) -> Result<ConvergenceTable> {
    let Some(first) = configs.first() else {
        return param_err("empty experiment family");
    };
    if let Some(c) = configs.iter().find(|c| !same_family(first, c)) {
        return param_err(format!(
            "configuration (N = {}, n = {}) differs from the family in alpha, drift, initial law or horizon",
            c.n_steps, c.n_particles
        ));
    }
    if (reference.alpha - first.alpha).abs() > 1e-12 || reference.grid != *grid {
        return param_err("reference flow does not match the family");
    }
    let mut rows = Vec::with_capacity(configs.len());
    for c in configs {
        let run = run_euler(c, grid)?;
        let row = convergence_row(c, &run, reference)?;
        log::info!(
            "N = {}, n = {}: e(T) = {:.4e}, E = {:.4e}",
            row.n_steps,
            row.n_particles,
            row.final_error,
            row.integrated_error
        );
        rows.push(row);
    }
    Ok(tabulate(rows))
}

pub fn tabulate(rows: Vec<ConvergenceRow>) -> ConvergenceTable {
    let mut violations = Vec::new();
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            let (a, b) = (&rows[i], &rows[j]);
            let dominates = b.n_steps >= a.n_steps && b.n_particles >= a.n_particles && i != j;
            if !dominates || (b.n_steps == a.n_steps && b.n_particles == a.n_particles) {
                continue;
            }
            let band = a.noise_band;
            let t_final = *a.times.last().unwrap_or(&1.0);
            if b.final_error > a.final_error + band || b.integrated_error > a.integrated_error + band * t_final {
                violations.push((i, j));
            }
        }
    }
    ConvergenceTable { rows, violations }
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub times: Vec<f64>,
    /// `||rho^A_t - rho^B_t||_1`.
    pub distance: Vec<f64>,
    pub error_a: Vec<f64>,
    pub error_b: Vec<f64>,
    pub noise_band: Vec<f64>,
    pub passed: bool,
}

/// Mutual L1 distance of two runs against the triangle-inequality budget
/// `e_A + e_B + band` at every checkpoint `kh >= h`.
pub fn uniqueness_from_runs(a: &EulerRun, b: &EulerRun, n_particles: usize, reference: &DensityFlow) -> Result<UniquenessReport> {
    a.flow.check_compatible(&b.flow)?;
    let (times, ea) = errors_against(a, reference)?;
    let (_, eb) = errors_against(b, reference)?;
    let offset = a.flow.len() - times.len();
    let mut r = UniquenessReport {
        times: times.clone(),
        distance: Vec::new(),
        error_a: ea,
        error_b: eb,
        noise_band: Vec::new(),
        passed: true,
    };
    for (s, t) in times.iter().enumerate() {
        let k = s + offset;
        let dist = a.flow.densities[k].sub(&b.flow.densities[k]).l1_norm();
        let i = reference.index_of(*t);
        let w = 0.5 * (a.bandwidths[k] + b.bandwidths[k]);
        let band = kde_noise_band(&reference.densities[i], n_particles, w);
        r.passed &= dist <= r.error_a[s] + r.error_b[s] + band;
        r.distance.push(dist);
        r.noise_band.push(band);
    }
    Ok(r)
}

/// Two runs of `config` differing only in the seed.
pub fn uniqueness_consistency(
    seed_a: u64,
    seed_b: u64,
    config: &EulerConfig,
    reference: &DensityFlow,
    grid: &TorusGrid,
) -> Result<UniquenessReport> {
    let run_a = run_euler(&EulerConfig { seed: seed_a, ..config.clone() }, grid)?;
    let run_b = if seed_a == seed_b {
        run_a.clone()
    } else {
        run_euler(&EulerConfig { seed: seed_b, ..config.clone() }, grid)?
    };
    uniqueness_from_runs(&run_a, &run_b, config.n_particles, reference)
}
