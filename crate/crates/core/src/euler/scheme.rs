use super::{kde_with_bandwidth, resolve_bandwidth, EulerConfig, ParticleEnsemble};
use crate::besov::{GridFunction, TorusGrid};
use crate::error::{param_err, Error, Result};
use crate::fokker_planck::{DensityFlow, DriftSpec};

/// Density fed into the drift at the grid times `kh`.
#[derive(Clone, Copy)]
pub enum Feedback<'a> {
    /// The estimate of the ensemble's own law (the plug-in scheme).
    SelfConsistent,
    /// A given flow saved at every `kh` (the linear scheme driven from outside).
    Frozen(&'a DensityFlow),
}

/// Output of [`run_euler`].
#[derive(Debug, Clone)]
pub struct EulerRun {
    /// Density estimates at `kh` for every step index reached, final time included.
    pub flow: DensityFlow,
    pub ensemble: ParticleEnsemble,
    /// Drift evaluations performed on `[kh, (k+1)h)`.
    pub drift_calls: Vec<usize>,
    /// Resolved bandwidth of each saved estimate.
    pub bandwidths: Vec<f64>,
}

/// `rho(x)` by linear interpolation inside the grid box, 0 outside.
pub fn snapshot_value(rho: &GridFunction, x: &[f64]) -> f64 {
    let half = 0.5 * rho.grid().extent();
    if x.iter().all(|v| *v >= -half && *v < half) {
        rho.interpolate(x).max(0.0)
    } else {
        0.0
    }
}

/// Writes `h b(x, rho(x))` into `out`.
pub fn drift_displacement(drift: &DriftSpec, rho: &GridFunction, h: f64, x: &[f64], out: &mut [f64]) {
    let u = snapshot_value(rho, x);
    drift.eval(x, u, out);
    for v in out.iter_mut() {
        *v *= h;
    }
}

/// Runs the density plug-in Euler scheme from `n` i.i.d. draws of the
/// initial law: pure stable increments on `[0, h)`, then on every
/// `[kh, (k+1)h)` the drift `b(x, rho_kh(x))` frozen at the step start.
pub fn run_euler(config: &EulerConfig, grid: &TorusGrid) -> Result<EulerRun> {
    config.validate()?;
    let ens = ParticleEnsemble::sample(&config.initial, config.n_particles, config.seed)?;
    continue_euler(config, grid, ens, Feedback::SelfConsistent)
}

/// Continues the scheme from an ensemble at a grid time `k0 h` up to `T`.
pub fn continue_euler(config: &EulerConfig, grid: &TorusGrid, mut ens: ParticleEnsemble, feedback: Feedback<'_>) -> Result<EulerRun> {
    if grid.dim() != config.dim || ens.dim() != config.dim {
        return param_err(format!(
            "dimension mismatch: config {}, grid {}, ensemble {}",
            config.dim,
            grid.dim(),
            ens.dim()
        ));
    }
    let h = config.step();
    let n_steps = config.n_steps;
    let k0 = (ens.time / h).round() as usize;
    if (ens.time - k0 as f64 * h).abs() > 1e-9 * h || k0 >= n_steps {
        return param_err(format!("ensemble time {} is not a grid time before T", ens.time));
    }
    ens.time = k0 as f64 * h;
    let frozen_index = |k: usize| -> Result<Option<usize>> {
        match feedback {
            Feedback::SelfConsistent => Ok(None),
            Feedback::Frozen(f) => {
                let t = k as f64 * h;
                let i = f.index_of(t);
                if f.grid != *grid || (f.times[i] - t).abs() > 1e-9 * h {
                    return param_err(format!("frozen flow has no density at t = {t} on this grid"));
                }
                Ok(Some(i))
            }
        }
    };
    for k in k0..n_steps {
        frozen_index(k)?;
    }

    let mut times = Vec::with_capacity(n_steps - k0 + 1);
    let mut densities = Vec::with_capacity(n_steps - k0 + 1);
    let mut bandwidths = Vec::with_capacity(n_steps - k0 + 1);
    let mut drift_calls = Vec::with_capacity(n_steps - k0);
    let mut snapshot = |ens: &ParticleEnsemble, k: usize| -> Result<GridFunction> {
        let outer = ens.outer_fraction(grid.extent());
        if outer > config.max_outer_mass {
            return Err(Error::DomainSize(format!(
                "t = {}: {outer:.3e} of the particles left the middle half of the grid (limit {:.1e})",
                k as f64 * h,
                config.max_outer_mass
            )));
        }
        let w = resolve_bandwidth(ens, config.bandwidth)?;
        let rho = kde_with_bandwidth(ens, grid, w)?;
        times.push(k as f64 * h);
        densities.push(rho.clone());
        bandwidths.push(w);
        Ok(rho)
    };

    for k in k0..n_steps {
        let own = snapshot(&ens, k)?;
        let calls = if k == 0 {
            ens.advance(h, config.alpha, None::<fn(usize, &[f64], &mut [f64])>)
        } else {
            let rho = match (feedback, frozen_index(k)?) {
                (Feedback::Frozen(f), Some(i)) => &f.densities[i],
                _ => &own,
            };
            let drift = &config.drift;
            ens.advance(h, config.alpha, Some(|_: usize, x: &[f64], out: &mut [f64]| drift_displacement(drift, rho, h, x, out)))
        };
        // keep the grid time exact rather than accumulating round-off
        ens.time = (k + 1) as f64 * h;
        drift_calls.push(calls);
    }
    snapshot(&ens, n_steps)?;

    Ok(EulerRun {
        flow: DensityFlow {
            grid: *grid,
            alpha: config.alpha,
            steps: n_steps,
            times,
            densities,
            drift: Some(config.drift.clone()),
            clipped_mass: 0.0,
        },
        ensemble: ens,
        drift_calls,
        bandwidths,
    })
}
