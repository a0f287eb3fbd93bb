use rustfft::num_complex::Complex64;
use stable_ddsde::besov::{build_partition, forward, inverse_real, GridFunction, TorusGrid};
use stable_ddsde::fokker_planck::{
    bootstrap_regularity, fp_residual, gronwall_contraction, linear_duhamel_residual, lq_density_bound, nfp_solve,
    nfp_solve_grid, DriftComponent, DriftSpec, InitialDensity, Saturation, SolverOptions, SpatialProfile,
};
use stable_ddsde::stable::{build_kernel_table, periodized_kernel};
use stable_ddsde::{KernelTable, StableParams};
use std::sync::OnceLock;

fn table15() -> &'static KernelTable {
    static T: OnceLock<KernelTable> = OnceLock::new();
    T.get_or_init(|| build_kernel_table(StableParams::new(1.5, 1).unwrap(), 400).unwrap())
}

fn pde_grid() -> TorusGrid {
    TorusGrid::new(80.0, 4096, 1).unwrap()
}

fn sin_tanh(a: f64) -> DriftSpec {
    DriftSpec::isotropic(
        DriftComponent::Product {
            amplitude: a,
            profile: SpatialProfile::Sin,
            saturation: Saturation::Tanh,
        },
        1,
    )
    .unwrap()
}

fn mixture() -> InitialDensity {
    InitialDensity::GaussianMixture {
        weights: vec![0.6, 0.4],
        means: vec![vec![-1.0], vec![1.5]],
        sigmas: vec![0.7, 0.5],
    }
}

fn shift_spectral(f: &GridFunction, c: f64) -> GridFunction {
    let g = f.grid();
    let spec: Vec<Complex64> = forward(g, f.values())
        .into_iter()
        .enumerate()
        .map(|(m, z)| z * Complex64::from_polar(1.0, -g.wavenumber(m) * c))
        .collect();
    GridFunction::new(*g, inverse_real(g, spec)).unwrap()
}

#[test]
fn driftless_flow_follows_the_kernel() {
    let grid = pde_grid();
    let t0 = 0.5;
    let rho0 = periodized_kernel(table15(), t0, &grid, &[0.0]);
    let flow = nfp_solve_grid(rho0, &DriftSpec::zero(1), 1.5, 1.0, 8, &SolverOptions::default()).unwrap();
    for (t, rho) in flow.times.iter().zip(&flow.densities) {
        let exact = periodized_kernel(table15(), t0 + t, &grid, &[0.0]);
        let err = rho.sub(&exact).l1_norm();
        assert!(err <= 1e-4, "t = {t}: L1 error {err}");
    }
}

#[test]
fn constant_drift_translates() {
    let grid = pde_grid();
    let c0 = 0.7;
    let t = 1.0;
    let drift = DriftSpec::isotropic(DriftComponent::Constant { value: c0 }, 1).unwrap();
    let moving = nfp_solve(&mixture(), &drift, 1.5, t, 128, &grid, &SolverOptions::default()).unwrap();
    let still = nfp_solve(&mixture(), &DriftSpec::zero(1), 1.5, t, 128, &grid, &SolverOptions::default()).unwrap();
    for (k, tk) in moving.times.iter().enumerate() {
        let err = moving.densities[k].sub(&shift_spectral(&still.densities[k], c0 * tk)).l1_norm();
        assert!(err <= 1e-4, "t = {tk}: L1 error {err}");
    }
}

#[test]
fn splitting_is_first_order() {
    let grid = pde_grid();
    let drift = sin_tanh(0.5);
    let finals: Vec<GridFunction> = [64usize, 128, 256]
        .iter()
        .map(|&n| {
            nfp_solve(&mixture(), &drift, 1.5, 1.0, n, &grid, &SolverOptions::default())
                .unwrap()
                .last()
                .clone()
        })
        .collect();
    let e1 = finals[0].sub(&finals[1]).l1_norm();
    let e2 = finals[1].sub(&finals[2]).l1_norm();
    let ratio = e1 / e2;
    eprintln!("self-convergence {e1:.3e} {e2:.3e} ratio {ratio:.3}");
    assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn driftless_maximum_does_not_increase() {
    let grid = pde_grid();
    let flow = nfp_solve(&mixture(), &DriftSpec::zero(1), 1.5, 1.0, 40, &grid, &SolverOptions::default()).unwrap();
    for w in flow.densities.windows(2) {
        assert!(w[1].sup_norm() <= w[0].sup_norm() * (1.0 + 1e-12));
    }
}

#[test]
fn mass_is_conserved_with_drift() {
    let grid = pde_grid();
    let flow = nfp_solve(&mixture(), &sin_tanh(0.5), 1.5, 1.0, 64, &grid, &SolverOptions::default()).unwrap();
    for rho in &flow.densities {
        assert!((rho.integral() - 1.0).abs() < 1e-8);
        assert!(rho.values().iter().all(|v| *v >= -1e-12));
    }
    assert!(flow.clipped_mass <= 1e-6);
}

#[test]
fn cfl_violation_is_rejected() {
    let grid = pde_grid();
    let err = nfp_solve(&mixture(), &sin_tanh(0.5), 1.5, 1.0, 4, &grid, &SolverOptions::default());
    assert!(matches!(err, Err(stable_ddsde::Error::Parameter(_))));
}

#[test]
fn linear_residual_of_identical_flows_vanishes() {
    let grid = pde_grid();
    let drift = sin_tanh(0.5);
    let f = nfp_solve(&mixture(), &drift, 1.5, 0.5, 32, &grid, &SolverOptions::default()).unwrap();
    let r = linear_duhamel_residual(&f, &f, &drift).unwrap();
    assert!(r.residual.iter().all(|v| *v == 0.0));
}

#[test]
fn linear_residual_within_splitting_budget() {
    let grid = pde_grid();
    let drift = sin_tanh(0.5);
    let coarse = nfp_solve(&mixture(), &drift, 1.5, 0.5, 32, &grid, &SolverOptions::default()).unwrap();
    let opts = SolverOptions {
        save_every: 2,
        ..SolverOptions::default()
    };
    let fine = nfp_solve(&mixture(), &drift, 1.5, 0.5, 64, &grid, &opts).unwrap();
    let r = linear_duhamel_residual(&coarse, &fine, &drift).unwrap();
    let rc = fp_residual(&coarse, &drift).unwrap();
    let rf = fp_residual(&fine, &drift).unwrap();
    for k in 0..r.times.len() {
        let budget = rc[k].1 + rf[k].1;
        eprintln!("t {:.3} linear {:.3e} budget {:.3e}", r.times[k], r.residual[k], budget);
        assert!(r.residual[k] <= budget * (1.0 + 1e-6) + 1e-9);
        assert!(r.field_sup[k] <= r.field_bound[k] * (1.0 + 1e-12));
    }
}

#[test]
fn gronwall_factor_contracts_at_the_predicted_rate() {
    let grid = pde_grid();
    let drift = sin_tanh(0.5);
    let mut consts = Vec::new();
    let mut kappas = Vec::new();
    for t in [0.05, 0.025, 0.0125] {
        let r = gronwall_contraction(&mixture(), &drift, 1.5, t, 16, &grid).unwrap();
        eprintln!("T {t} kappa {:.4e} second {:.4e} C {:.4} k {:.3}", r.kappa, r.kappa_second, r.rate_constant, r.perturbation_wavenumber);
        assert!(r.kappa < 1.0);
        consts.push(r.rate_constant);
        kappas.push(r.kappa);
    }
    assert!(kappas.windows(2).all(|w| w[1] < w[0]));
    let (lo, hi) = consts.iter().fold((f64::MAX, 0.0f64), |(a, b), c| (a.min(*c), b.max(*c)));
    assert!(hi / lo <= 1.3, "rate constants {consts:?}");
}

#[test]
fn gronwall_factor_vanishes_without_drift() {
    let r = gronwall_contraction(&mixture(), &DriftSpec::zero(1), 1.5, 0.05, 8, &pde_grid()).unwrap();
    assert_eq!(r.kappa, 0.0);
}

#[test]
fn gronwall_factor_grows_with_lipschitz_constant() {
    let grid = pde_grid();
    let a = gronwall_contraction(&mixture(), &sin_tanh(0.25), 1.5, 0.05, 16, &grid).unwrap();
    let b = gronwall_contraction(&mixture(), &sin_tanh(0.5), 1.5, 0.05, 16, &grid).unwrap();
    assert!(a.kappa < b.kappa);
}

#[test]
fn bootstrap_needs_two_stages_and_is_refinement_stable() {
    let drift = sin_tanh(0.5);
    let rho0 = InitialDensity::HolderBump {
        center: vec![0.0],
        width: 2.0,
        beta0: 0.8,
    };
    let mut totals = Vec::new();
    for m in [4096usize, 8192] {
        let grid = TorusGrid::new(16.0 * std::f64::consts::PI, m, 1).unwrap();
        let part = build_partition(&grid, 7).unwrap();
        let opts = SolverOptions {
            save_every: 8,
            ..SolverOptions::default()
        };
        let flow = nfp_solve(&rho0, &drift, 1.5, 0.5, 128, &grid, &opts).unwrap();
        assert!(bootstrap_regularity(&flow, 0.8, 1, &part).is_err());
        let r = bootstrap_regularity(&flow, 0.8, 2, &part).unwrap();
        eprintln!("M {m}: {:?} {:?}", r.exponents, r.norms);
        assert_eq!(r.stages_required, 2);
        assert_eq!(r.exponents, vec![0.5, 0.8]);
        totals.push(r.norms.clone());
    }
    for (a, b) in totals[0].iter().zip(&totals[1]) {
        assert!((a / b - 1.0).abs() <= 0.25, "{a} vs {b}");
    }
}

#[test]
fn lq_norms_follow_kernel_scaling() {
    let grid = pde_grid();
    let t0 = 0.5;
    let q = 2.5;
    let rho0 = periodized_kernel(table15(), t0, &grid, &[0.0]);
    let flow = nfp_solve_grid(rho0, &DriftSpec::zero(1), 1.5, 1.0, 8, &SolverOptions::default()).unwrap();
    let r = lq_density_bound(&flow, q).unwrap();
    let fine = TorusGrid::new(400.0, 1 << 17, 1).unwrap();
    let unit = GridFunction::from_fn(&fine, |x| table15().density_radial(1.0, x[0].abs())).lp_norm(q);
    for (t, n) in r.times.iter().zip(&r.norms) {
        let exact = (t0 + t).powf(-r.exponent) * unit;
        assert!((n / exact - 1.0).abs() < 1e-3, "t {t}: {n} vs {exact}");
    }
    assert!(r.sup_scaled.is_finite());
}

#[test]
fn l2_norm_decays_without_drift() {
    let grid = pde_grid();
    let flow = nfp_solve(&mixture(), &DriftSpec::zero(1), 1.5, 1.0, 20, &grid, &SolverOptions::default()).unwrap();
    let r = lq_density_bound(&flow, 2.0).unwrap();
    assert!(r.norms.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn density_dominated_by_kernel() {
    let drift = sin_tanh(0.5);
    let rho0 = InitialDensity::gaussian(0.0, 0.05);
    let mut consts = Vec::new();
    for m in [2048usize, 4096] {
        let grid = TorusGrid::new(80.0, m, 1).unwrap();
        let flow = nfp_solve(&rho0, &drift, 1.5, 1.0, 128, &grid, &SolverOptions::default()).unwrap();
        let mut c = 0.0f64;
        for (t, rho) in flow.times.iter().zip(&flow.densities) {
            if *t < 0.1 {
                continue;
            }
            let p = periodized_kernel(table15(), *t, &grid, &[0.0]);
            for i in 0..grid.len() {
                if grid.coordinate(i).abs() <= 20.0 {
                    c = c.max(rho.values()[i] / p.values()[i]);
                }
            }
        }
        eprintln!("M {m}: C {c}");
        consts.push(c);
    }
    assert!(consts.iter().all(|c| c.is_finite()));
    assert!((consts[0] / consts[1] - 1.0).abs() < 0.25);
}
