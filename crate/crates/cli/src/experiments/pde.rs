use stable_ddsde::besov::build_partition;
use stable_ddsde::fokker_planck::{
    bootstrap_regularity, fp_residual, gronwall_contraction, lq_density_bound, nfp_solve, SolverOptions,
};
use stable_ddsde::{Error, TorusGrid};

use super::{grid_csv, row, section, spread};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Context};
use crate::record::RunContext;

pub(super) fn simulate_pde(cfg: &ExperimentConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let k = section(&cfg.kernel, "kernel")?;
    let m = section(&cfg.model, "model")?;
    let p = section(&cfg.pde, "pde")?;
    let alpha = k.params.alpha();

    ctx.progress(format!("solving to T = {} in {} steps", p.t_final, p.steps));
    let flow = nfp_solve(&m.initial, &m.drift, alpha, p.t_final, p.steps, &m.grid, &p.solver).context("Fokker-Planck solve")?;
    flow.save_dir(ctx.dir().join("flow")).context("saving the flow")?;
    ctx.adopt("flow")?;
    grid_csv(ctx, "final_density.csv", flow.last())?;

    let m0 = flow.densities[0].integral();
    let drift = (flow.last().integral() - m0).abs();
    let budget = p.solver.clip_budget + 1e-9;
    ctx.check("mass_conservation", drift <= budget, drift, Some(budget), format!("clipped {}", flow.clipped_mass));
    let min = flow
        .densities
        .iter()
        .flat_map(|d| d.values().iter().cloned())
        .fold(f64::INFINITY, f64::min);
    ctx.check("positivity", min >= 0.0, min, Some(0.0), "");
    ctx.scalar("mass_final", flow.last().integral());
    ctx.scalar("clipped_mass", flow.clipped_mass);

    if flow.len() >= 3 {
        let res = fp_residual(&flow, &m.drift).context("equation residual")?;
        ctx.scalar("residual_max", res.iter().map(|r| r.1).fold(0.0, f64::max));
        ctx.series("fp_residual", res);
    }
    let lq = lq_density_bound(&flow, p.lq_exponent).context("L^q bound")?;
    ctx.check("lq_bound_finite", lq.sup_scaled.is_finite(), lq.sup_scaled, None, format!("q = {}", p.lq_exponent));
    ctx.scalar("lq_sup_scaled", lq.sup_scaled);
    ctx.series("lq_scaled", lq.times.iter().cloned().zip(lq.scaled.iter().cloned()));
    ctx.write_json("lq_bound.json", &lq)?;

    if let Some(g) = &p.gronwall {
        let mut reports = Vec::new();
        for &t in &g.t_small {
            ctx.progress(format!("contraction factor at T = {t}"));
            let r = gronwall_contraction(&m.initial, &m.drift, alpha, t, g.steps, &m.grid).context(format!("contraction at T = {t}"))?;
            ctx.check(&format!("gronwall_kappa_T_{t}"), r.kappa < 1.0, r.kappa, Some(1.0), "");
            reports.push(r);
        }
        let rows: Vec<Vec<String>> = reports
            .iter()
            .map(|r| row(&[r.t_small, r.kappa, r.kappa_second, r.rate_constant, r.perturbation_wavenumber]))
            .collect();
        ctx.write_csv("gronwall.csv", &["t_small", "kappa", "kappa_second", "rate_constant", "wavenumber"], &rows)?;
        ctx.series("gronwall_kappa", reports.iter().map(|r| (r.t_small, r.kappa)));
        let consts: Vec<f64> = reports.iter().map(|r| r.rate_constant).collect();
        if consts.len() >= 2 && consts.iter().all(|c| *c > 0.0) {
            let s = spread(&consts);
            ctx.check(
                "gronwall_rate",
                s <= 1.0 + g.tolerance,
                s - 1.0,
                Some(g.tolerance),
                "spread of kappa / T^((alpha-1)/alpha)",
            );
        }
    }

    if let Some(b) = &p.bootstrap {
        let mut all = Vec::new();
        for &points in &b.points {
            ctx.progress(format!("bootstrap on {points} points"));
            let grid = TorusGrid::new(b.extent, points, 1).context("bootstrap grid")?;
            let part = build_partition(&grid, b.j_max).context("bootstrap partition")?;
            let opts = SolverOptions {
                save_every: b.save_every,
                ..p.solver
            };
            let flow = nfp_solve(&m.initial, &m.drift, alpha, b.t_final, b.steps, &grid, &opts).context("bootstrap solve")?;
            match bootstrap_regularity(&flow, b.beta0, b.stages, &part) {
                Ok(r) => all.push((points, r)),
                Err(Error::Diagnostic(msg)) => {
                    ctx.check(&format!("bootstrap_finite_M_{points}"), false, f64::INFINITY, None, msg);
                }
                Err(e) => return Err(e).context("bootstrap"),
            }
        }
        let mut rows = Vec::new();
        for (points, r) in &all {
            for (s, (e, n)) in r.exponents.iter().zip(&r.norms).enumerate() {
                rows.push(row(&[*points as f64, (s + 1) as f64, *e, *n]));
            }
            let top = r.norms.iter().cloned().fold(0.0, f64::max);
            ctx.check(&format!("bootstrap_finite_M_{points}"), top.is_finite(), top, None, "");
            let last = *r.exponents.last().unwrap();
            ctx.check(
                &format!("bootstrap_reaches_beta0_M_{points}"),
                (last - b.beta0).abs() < 1e-12,
                last,
                Some(b.beta0),
                format!("{} stages", r.exponents.len()),
            );
        }
        ctx.write_csv("bootstrap.csv", &["points", "stage", "exponent", "norm"], &rows)?;
        if all.len() >= 2 {
            let (first, last) = (&all[0].1, &all[all.len() - 1].1);
            let change = first.norms.iter().zip(&last.norms).map(|(a, c)| (a / c - 1.0).abs()).fold(0.0, f64::max);
            ctx.check("bootstrap_refinement", change <= b.tolerance, change, Some(b.tolerance), "");
        }
    }
    Ok(())
}
