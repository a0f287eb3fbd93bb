use stable_ddsde::euler::{
    continue_euler, convergence_row, domination_report, duhamel_density_with, holder_report, run_euler, tabulate,
    uniqueness_consistency, ConvergenceRow, DominationReport, EulerRun, Feedback, ResolvedRegion,
};
use stable_ddsde::fokker_planck::{nfp_solve, SolverOptions};
use stable_ddsde::rng::StreamDomain;
use stable_ddsde::{DensityFlow, EulerConfig, KernelTable, ParticleEnsemble};

use super::{grid_csv, load_kernel, row, section};
use crate::config::{ExperimentConfig, ModelSection, ParticleSection};
use crate::error::{CliError, Context};
use crate::record::{fmt_num, RunContext};

fn reference(ctx: &RunContext, m: &ModelSection, base: &EulerConfig, steps: usize) -> Result<DensityFlow, CliError> {
    ctx.progress(format!("reference solve in {steps} steps"));
    nfp_solve(&m.initial, &m.drift, base.alpha, base.t_final, steps, &m.grid, &SolverOptions::default())
        .context("reference Fokker-Planck solve")
}

fn run(ctx: &RunContext, c: &EulerConfig, m: &ModelSection) -> Result<EulerRun, CliError> {
    ctx.progress(format!("Euler scheme: N = {}, n = {}, seed {}", c.n_steps, c.n_particles, c.seed));
    run_euler(c, &m.grid).context(format!("Euler run N = {}, n = {}", c.n_steps, c.n_particles))
}

fn domination(ctx: &mut RunContext, p: &ParticleSection, run: &EulerRun, table: &KernelTable) -> Result<DominationReport, CliError> {
    let region = ResolvedRegion {
        relative_floor: p.region_floor,
    };
    let r = domination_report(&run.flow, &p.base.initial, table, region).context("domination report")?;
    ctx.series("domination_C", r.times.iter().cloned().zip(r.constants.iter().cloned()));
    ctx.scalar("domination_sup", r.sup);
    ctx.write_json("domination.json", &r)?;
    ctx.check("domination_bound", r.sup <= p.domination_bound, r.sup, Some(p.domination_bound), "sup_t C(t)");
    Ok(r)
}

pub(super) fn simulate_particles(cfg: &ExperimentConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let k = section(&cfg.kernel, "kernel")?;
    let m = section(&cfg.model, "model")?;
    let p = section(&cfg.particles, "particles")?;
    let table = load_kernel(ctx, k)?;
    let c = &p.base;
    let out = run(ctx, c, m)?;
    save_flow(ctx, &out)?;
    ctx.scalar("n_steps", c.n_steps as f64);
    ctx.scalar("n_particles", c.n_particles as f64);
    ctx.series("bandwidth", out.flow.times.iter().cloned().zip(out.bandwidths.iter().cloned()));
    let first_calls = out.drift_calls.first().copied().unwrap_or(0);
    ctx.check("first_interval_drift_free", first_calls == 0, first_calls as f64, Some(0.0), "drift evaluations on [0, h)");

    let dom = domination(ctx, p, &out, &table)?;
    let mut holder = None;
    let mut errors = None;
    if let Some(beta) = p.holder_beta {
        let region = ResolvedRegion {
            relative_floor: p.region_floor,
        };
        let h = holder_report(&out.flow, &c.initial, &table, beta, region).context("Hölder report")?;
        ctx.scalar("holder_C_space", h.space);
        ctx.scalar("holder_C_time", h.time);
        ctx.write_json("holder.json", &h)?;
        ctx.check("holder_finite", h.space.is_finite() && h.time.is_finite(), h.space.max(h.time), None, format!("beta {beta}"));
        holder = Some((h.space, h.time));
    }
    if let Some(steps) = p.reference_steps {
        let reference = reference(ctx, m, c, steps)?;
        let r = convergence_row(c, &out, &reference).context("error against the reference")?;
        ctx.series("l1_error", r.times.iter().cloned().zip(r.errors.iter().cloned()));
        ctx.scalar("final_l1_error", r.final_error);
        ctx.scalar("integrated_l1_error", r.integrated_error);
        ctx.scalar("noise_band", r.noise_band);
        ctx.check("final_l1_error", r.final_error <= p.error_tolerance, r.final_error, Some(p.error_tolerance), "");
        errors = Some(r);
    }
    diagnostics(ctx, &dom, errors.as_ref(), holder)?;
    if let Some(d) = &p.duhamel {
        ctx.progress(format!("Duhamel estimator from x0 = {:?} with {} paths", d.x0, d.paths));
        let density = duhamel_density_with(&d.x0, c.t_final, c, d.paths, &m.grid, &table, Some(&out.flow))
            .context("Duhamel estimator")?;
        grid_csv(ctx, "duhamel_density.csv", &density)?;
        let direct = ParticleEnsemble::at_point(&d.x0, d.particles, c.seed, StreamDomain::Generic).context("point ensemble")?;
        let frozen = continue_euler(c, &m.grid, direct, Feedback::Frozen(&out.flow)).context("frozen-coefficient run")?;
        let err = density.sub(frozen.flow.last()).l1_norm();
        ctx.scalar("duhamel_mass", density.integral());
        ctx.check("duhamel_cross_validation", err <= d.tolerance, err, Some(d.tolerance), "L1 against the point-started particles");
    }
    Ok(())
}

/// One row per saved positive time; columns without data are left empty.
fn diagnostics(
    ctx: &mut RunContext,
    dom: &DominationReport,
    errors: Option<&ConvergenceRow>,
    holder: Option<(f64, f64)>,
) -> Result<(), CliError> {
    let blank = String::new;
    let (hs, ht) = holder.map_or((blank(), blank()), |(s, t)| (fmt_num(s), fmt_num(t)));
    let rows: Vec<Vec<String>> = dom
        .times
        .iter()
        .zip(&dom.constants)
        .map(|(t, c)| {
            let e = errors
                .and_then(|r| r.times.iter().position(|s| s == t).map(|i| fmt_num(r.errors[i])))
                .unwrap_or_else(blank);
            vec![fmt_num(*t), e, fmt_num(*c), hs.clone(), ht.clone()]
        })
        .collect();
    ctx.write_csv("diagnostics.csv", &["time", "l1_error", "domination_C", "holder_C_space", "holder_C_time"], &rows)
}

fn save_flow(ctx: &mut RunContext, run: &EulerRun) -> Result<(), CliError> {
    run.flow.save_dir(ctx.dir().join("flow")).context("saving the density snapshots")?;
    ctx.adopt("flow")?;
    grid_csv(ctx, "final_density.csv", run.flow.last())
}

pub(super) fn convergence(cfg: &ExperimentConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let k = section(&cfg.kernel, "kernel")?;
    let m = section(&cfg.model, "model")?;
    let p = section(&cfg.particles, "particles")?;
    let c = section(&cfg.convergence, "convergence")?;
    let table = load_kernel(ctx, k)?;
    let reference = reference(ctx, m, &p.base, c.reference_steps)?;
    let mut rows = Vec::new();
    let mut sups = Vec::new();
    for config in &c.family {
        let out = run(ctx, config, m)?;
        rows.push(convergence_row(config, &out, &reference).context("error against the reference")?);
        let region = ResolvedRegion {
            relative_floor: p.region_floor,
        };
        sups.push(domination_report(&out.flow, &config.initial, &table, region).context("domination report")?.sup);
    }
    let t = tabulate(rows);
    let csv_rows: Vec<Vec<String>> = t
        .rows
        .iter()
        .zip(&sups)
        .map(|(r, s)| {
            row(&[
                r.n_steps as f64,
                r.n_particles as f64,
                r.final_error,
                r.integrated_error,
                r.max_error,
                r.noise_band,
                *s,
            ])
        })
        .collect();
    ctx.write_csv(
        "convergence.csv",
        &["n_steps", "n_particles", "final_error", "integrated_error", "max_error", "noise_band", "domination_sup"],
        &csv_rows,
    )?;
    ctx.write_json("convergence.json", &t)?;
    ctx.series("final_error_vs_N", t.rows.iter().map(|r| (r.n_steps as f64, r.final_error)));
    ctx.series("integrated_error_vs_N", t.rows.iter().map(|r| (r.n_steps as f64, r.integrated_error)));
    ctx.series("domination_vs_N", t.rows.iter().zip(&sups).map(|(r, s)| (r.n_steps as f64, *s)));
    let finite = t.rows.iter().all(|r| r.integrated_error.is_finite());
    ctx.check("integrated_error_finite", finite, t.rows.iter().map(|r| r.integrated_error).fold(0.0, f64::max), None, "");
    ctx.check(
        "monotone_within_noise",
        t.violations.is_empty(),
        t.violations.len() as f64,
        Some(0.0),
        format!("violating pairs {:?}", t.violations),
    );
    for (r, s) in t.rows.iter().zip(&sups) {
        ctx.check(
            &format!("domination_bound_N_{}_n_{}", r.n_steps, r.n_particles),
            *s <= p.domination_bound,
            *s,
            Some(p.domination_bound),
            "",
        );
    }
    if let Some(tol) = c.final_tolerance {
        let best = t.rows.iter().max_by_key(|r| (r.n_steps, r.n_particles)).unwrap();
        ctx.check(
            "final_l1_error",
            best.final_error <= tol,
            best.final_error,
            Some(tol),
            format!("N = {}, n = {}", best.n_steps, best.n_particles),
        );
    }
    Ok(())
}

pub(super) fn uniqueness(cfg: &ExperimentConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let m = section(&cfg.model, "model")?;
    let p = section(&cfg.particles, "particles")?;
    let u = section(&cfg.uniqueness, "uniqueness")?;
    let reference = reference(ctx, m, &p.base, u.reference_steps)?;
    ctx.progress(format!("two runs with seeds {} and {}", cfg.seed, u.seed_b));
    let r = uniqueness_consistency(cfg.seed, u.seed_b, &p.base, &reference, &m.grid).context("independent runs")?;
    let rows: Vec<Vec<String>> = (0..r.times.len())
        .map(|i| {
            let budget = r.error_a[i] + r.error_b[i] + r.noise_band[i];
            row(&[r.times[i], r.distance[i], r.error_a[i], r.error_b[i], r.noise_band[i], budget])
        })
        .collect();
    ctx.write_csv("uniqueness.csv", &["time", "distance", "error_a", "error_b", "noise_band", "budget"], &rows)?;
    ctx.series("distance", r.times.iter().cloned().zip(r.distance.iter().cloned()));
    ctx.series("l1_error", r.times.iter().cloned().zip(r.error_a.iter().cloned()));
    let worst = r.distance.iter().cloned().fold(0.0, f64::max);
    ctx.scalar("max_distance", worst);
    ctx.check("triangle_budget", r.passed, worst, None, "distance <= e_A + e_B + band at every checkpoint");
    Ok(())
}
