use serde::Serialize;

use super::solver::{evolve, Coefficient, SolverOptions};
use super::{DensityFlow, DriftSpec, InitialDensity};
use crate::besov::{besov_norm, frac_laplacian, DyadicPartition, Exponent, GridFunction, TorusGrid};
use crate::error::{param_err, Error, Result};

/// Divergence of the vector field `fields[a]` (one grid function per axis), spectrally.
fn divergence(fields: &[GridFunction]) -> GridFunction {
    let mut out = GridFunction::zeros(fields[0].grid());
    for (a, f) in fields.iter().enumerate() {
        out.axpy(1.0, &f.derivative(a, 1));
    }
    out
}

/// Centered (one-sided at the ends) time derivative of the flow at index `n`.
fn time_derivative(times: &[f64], rho: &[GridFunction], n: usize) -> GridFunction {
    let (a, b) = if n == 0 {
        (0, 1)
    } else if n + 1 == times.len() {
        (n - 1, n)
    } else {
        (n - 1, n + 1)
    };
    rho[b].sub(&rho[a]).scaled(1.0 / (times[b] - times[a]))
}

fn nonlinear_flux(rho: &GridFunction, drift: &DriftSpec) -> Vec<GridFunction> {
    let grid = rho.grid();
    (0..grid.dim())
        .map(|a| {
            let v: Vec<f64> = (0..grid.len())
                .map(|i| {
                    let x = grid.point(i);
                    let u = rho.values()[i];
                    drift.component(a, x[a], u) * u
                })
                .collect();
            GridFunction::new(*grid, v).expect("finite flux")
        })
        .collect()
}

/// L1 residual of the saved flow against
/// `d rho/dt = Delta^{alpha/2} rho - div(b(x, rho) rho)` at interior saved times.
pub fn fp_residual(flow: &DensityFlow, drift: &DriftSpec) -> Result<Vec<(f64, f64)>> {
    if flow.len() < 3 {
        return param_err("need at least three saved times");
    }
    let mut out = Vec::new();
    for n in 1..flow.len() - 1 {
        let rho = &flow.densities[n];
        let mut r = time_derivative(&flow.times, &flow.densities, n);
        r.axpy(-1.0, &frac_laplacian(rho, flow.alpha)?);
        r.axpy(1.0, &divergence(&nonlinear_flux(rho, drift)));
        out.push((flow.times[n], r.l1_norm()));
    }
    Ok(out)
}

/// Defect of `u = rho^A - rho^B` against the linear equation it solves.
#[derive(Debug, Clone, Serialize)]
pub struct LinearResidual {
    pub times: Vec<f64>,
    /// `||d u/dt - Delta^{alpha/2} u + div(B u)||_1` per interior time.
    pub residual: Vec<f64>,
    /// `sup |B|` per interior time.
    pub field_sup: Vec<f64>,
    /// `sup |b| + Lip_u(b) sup rho^B` per interior time.
    pub field_bound: Vec<f64>,
}

/// Builds `B = b(rho^A) + rho^B (b(rho^A) - b(rho^B)) / u` (0/0 = 0 where
/// `|u| < 1e-14`) and evaluates the defect of
/// `d u/dt = Delta^{alpha/2} u - div(B u)` by spectral differentiation and
/// centered time differences. The bound `|B(x)| <= sup|b| + Lip_u(b) rho^B(x)`
/// is asserted at every node.
pub fn linear_duhamel_residual(a: &DensityFlow, b: &DensityFlow, drift: &DriftSpec) -> Result<LinearResidual> {
    a.check_compatible(b)?;
    if a.len() < 3 {
        return param_err("need at least three saved times");
    }
    let grid = a.grid;
    let d = grid.dim();
    let bound = drift.bound();
    let lip = drift.lipschitz_u();
    let u_all: Vec<GridFunction> = a.densities.iter().zip(&b.densities).map(|(x, y)| x.sub(y)).collect();
    let mut out = LinearResidual {
        times: Vec::new(),
        residual: Vec::new(),
        field_sup: Vec::new(),
        field_bound: Vec::new(),
    };
    for n in 1..a.len() - 1 {
        let (ra, rb, u) = (&a.densities[n], &b.densities[n], &u_all[n]);
        let mut fields = vec![vec![0.0; grid.len()]; d];
        let mut sup_b = 0.0f64;
        for i in 0..grid.len() {
            let x = grid.point(i);
            let (ua, ub, ui) = (ra.values()[i], rb.values()[i], u.values()[i]);
            let mut norm2 = 0.0;
            for (c, field) in fields.iter_mut().enumerate() {
                let ba = drift.component(c, x[c], ua);
                let bb = drift.component(c, x[c], ub);
                let q = if ui.abs() < 1e-14 { 0.0 } else { (ba - bb) / ui };
                let v = ba + ub * q;
                field[i] = v * ui;
                norm2 += v * v;
            }
            let mag = norm2.sqrt();
            let allowed = bound + lip * ub.abs();
            if mag > allowed * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Diagnostic(format!(
                    "|B| = {mag} exceeds sup|b| + Lip rho^B = {allowed} at node {i}, time {}",
                    a.times[n]
                )));
            }
            sup_b = sup_b.max(mag);
        }
        let flux: Vec<GridFunction> = fields
            .into_iter()
            .map(|f| GridFunction::new(grid, f))
            .collect::<Result<_>>()?;
        let mut r = time_derivative(&a.times, &u_all, n);
        r.axpy(-1.0, &frac_laplacian(u, a.alpha)?);
        r.axpy(1.0, &divergence(&flux));
        out.times.push(a.times[n]);
        out.residual.push(r.l1_norm());
        out.field_sup.push(sup_b);
        out.field_bound.push(bound + lip * rb.sup_norm());
    }
    Ok(out)
}

/// Outcome of [`gronwall_contraction`].
#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub t_small: f64,
    /// `||Phi(f) - Phi(g)|| / ||f - g||` in `L^inf_T(L^inf)`.
    pub kappa: f64,
    /// Same ratio one iteration later, `||Phi^2 f - Phi^2 g|| / ||Phi f - Phi g||`.
    pub kappa_second: f64,
    /// `kappa / T^{(alpha-1)/alpha}`.
    pub rate_constant: f64,
    /// Wavenumber of the perturbation separating the two starting flows.
    pub perturbation_wavenumber: f64,
}

/// Fixed-point map of the uniqueness argument: the solution of the linear
/// equation whose drift coefficient is `b(x, f_t(x))` for the given flow `f`.
pub fn contraction_map(
    rho0: &GridFunction,
    drift: &DriftSpec,
    flow: &DensityFlow,
    opts: &SolverOptions,
) -> Result<DensityFlow> {
    evolve(
        rho0.clone(),
        drift,
        flow.alpha,
        flow.t_final(),
        flow.steps,
        opts,
        Coefficient::Frozen(flow),
    )
}

/// Applies the fixed-point map to two flows with the same initial density:
/// `f` is the drift-free flow and `g = f + eps cos(k x_1)`, with `k` the grid
/// wavenumber closest to `T^{-1/alpha}` (the scale at which the kernel bound
/// `int_0^T ||grad p(T-s)||_1 ds ~ T^{(alpha-1)/alpha}` is sharp).
/// Fails with a diagnostic error when `kappa >= 1`.
pub fn gronwall_contraction(
    rho0: &InitialDensity,
    drift: &DriftSpec,
    alpha: f64,
    t_small: f64,
    steps: usize,
    grid: &TorusGrid,
) -> Result<ContractionReport> {
    let opts = SolverOptions {
        save_every: 1,
        ..SolverOptions::default()
    };
    let start = rho0.on_grid(grid)?;
    let d = grid.dim();
    let f0 = evolve(start.clone(), &DriftSpec::zero(d), alpha, t_small, steps, &opts, Coefficient::Nonlinear)?;
    let k_target = t_small.powf(-1.0 / alpha);
    let dk = 2.0 * std::f64::consts::PI / grid.extent();
    let k = ((k_target / dk).round().max(1.0)) * dk;
    let eps = 1e-2 * start.sup_norm();
    let bump = GridFunction::from_fn(grid, |x| eps * (k * x[0]).cos());
    let mut g0 = f0.clone();
    for rho in g0.densities.iter_mut() {
        rho.axpy(1.0, &bump);
    }
    let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    let f1 = contraction_map(&start, drift, &f0, &opts)?;
    let g1 = contraction_map(&start, drift, &g0, &opts)?;
    let d0 = f0.sup_distance(&g0)?;
    let d1 = f1.sup_distance(&g1)?;
    let kappa = ratio(d1, d0);
    let f2 = contraction_map(&start, drift, &f1, &opts)?;
    let g2 = contraction_map(&start, drift, &g1, &opts)?;
    let kappa_second = ratio(f2.sup_distance(&g2)?, d1);
    if kappa >= 1.0 {
        return Err(Error::Diagnostic(format!(
            "contraction factor {kappa} >= 1 at T = {t_small}; shorten the horizon or weaken the drift"
        )));
    }
    Ok(ContractionReport {
        t_small,
        kappa,
        kappa_second,
        rate_constant: kappa / t_small.powf((alpha - 1.0) / alpha),
        perturbation_wavenumber: k,
    })
}

/// Besov norms along the regularity induction.
#[derive(Debug, Clone, Serialize)]
pub struct BootstrapReport {
    pub beta0: f64,
    pub stages_required: usize,
    /// `gamma_k = min(k (alpha - 1), beta0)` for `k = 1..=stages`.
    pub exponents: Vec<f64>,
    /// `sup_t ||rho_t||_{B^{gamma_k}_{inf,inf}}`.
    pub norms: Vec<f64>,
}

pub fn bootstrap_regularity(flow: &DensityFlow, beta0: f64, stages: usize, part: &DyadicPartition) -> Result<BootstrapReport> {
    let alpha = flow.alpha;
    if !(beta0 > 1.0 - alpha / 2.0 && beta0 < 1.0) {
        return param_err(format!("beta0 must lie in ({}, 1), got {beta0}", 1.0 - alpha / 2.0));
    }
    let stages_required = (beta0 / (alpha - 1.0)).ceil() as usize;
    if stages < stages_required {
        return param_err(format!("{stages} stages cannot reach {beta0}; need {stages_required}"));
    }
    let inf = Exponent::Infinity;
    let mut exponents = Vec::with_capacity(stages);
    let mut norms = Vec::with_capacity(stages);
    for k in 1..=stages {
        let gamma = (k as f64 * (alpha - 1.0)).min(beta0);
        let mut sup = 0.0f64;
        for rho in &flow.densities {
            sup = sup.max(besov_norm(rho, gamma, inf, inf, part)?.total);
        }
        if !(sup <= 1e6) {
            return Err(Error::Diagnostic(format!("stage {k}: Besov norm {sup} blew up")));
        }
        exponents.push(gamma);
        norms.push(sup);
    }
    if (exponents.last().unwrap() - beta0).abs() > 1e-15 {
        return Err(Error::Diagnostic("final stage does not reach beta0".into()));
    }
    Ok(BootstrapReport {
        beta0,
        stages_required,
        exponents,
        norms,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LqReport {
    pub q: f64,
    /// `d (q-1) / (alpha q)`.
    pub exponent: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// `||rho_t||_q t^{exponent}`.
    pub scaled: Vec<f64>,
    pub sup_scaled: f64,
}

/// `||rho_t||_q t^{d(q-1)/(alpha q)}` at every positive saved time.
pub fn lq_density_bound(flow: &DensityFlow, q: f64) -> Result<LqReport> {
    if !(q > 1.0 && q.is_finite()) {
        return param_err(format!("q must lie in (1, inf), got {q}"));
    }
    let d = flow.grid.dim() as f64;
    let exponent = d * (q - 1.0) / (flow.alpha * q);
    let mut r = LqReport {
        q,
        exponent,
        times: Vec::new(),
        norms: Vec::new(),
        scaled: Vec::new(),
        sup_scaled: 0.0,
    };
    for (t, rho) in flow.times.iter().zip(&flow.densities) {
        if *t <= 0.0 {
            continue;
        }
        let n = rho.lp_norm(q);
        let s = n * t.powf(exponent);
        r.times.push(*t);
        r.norms.push(n);
        r.scaled.push(s);
        r.sup_scaled = r.sup_scaled.max(s);
    }
    if !r.sup_scaled.is_finite() {
        return Err(Error::Diagnostic("L^q bound is not finite".into()));
    }
    Ok(r)
}
