use rayon::prelude::*;
use serde::Serialize;

use stable_ddsde::rng::{stream_id, RngStream, StreamDomain};
use stable_ddsde::stable::{
    build_kernel_table, ck_defect, fill_increment, heat_equation_residual, kernel_bound_report, p_alpha, BoundReport,
};
use stable_ddsde::{KernelTable, StableParams};

use super::{fit_line, load_kernel, row, section};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Context};
use crate::record::RunContext;

const CF_CHUNK: usize = 65_536;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CfProbe {
    pub xi: f64,
    pub re: f64,
    pub im: f64,
    pub exact: f64,
    pub error: f64,
}

/// Empirical characteristic function of `n` unit-time increments at
/// `|xi|` in `probes` (along the diagonal when `d > 1`), against
/// `exp(-|xi|^alpha)`. Chunk `c` of the sample uses stream `(seed, c)`.
pub fn characteristic_function_errors(
    params: &StableParams,
    n: usize,
    probes: &[f64],
    seed: u64,
) -> stable_ddsde::Result<Vec<CfProbe>> {
    let d = params.dim();
    let chunks = n.div_ceil(CF_CHUNK);
    let partial = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = RngStream::new(seed, stream_id(StreamDomain::Generic, c as u64));
            let m = CF_CHUNK.min(n - c * CF_CHUNK);
            let mut x = vec![0.0; d];
            let mut acc = vec![(0.0, 0.0); probes.len()];
            for _ in 0..m {
                fill_increment(1.0, params, &mut rng, &mut x)?;
                let s = x.iter().sum::<f64>() / (d as f64).sqrt();
                for (a, xi) in acc.iter_mut().zip(probes) {
                    a.0 += (xi * s).cos();
                    a.1 += (xi * s).sin();
                }
            }
            Ok(acc)
        })
        .collect::<stable_ddsde::Result<Vec<_>>>()?;
    Ok(probes
        .iter()
        .enumerate()
        .map(|(k, &xi)| {
            let re = partial.iter().map(|p| p[k].0).sum::<f64>() / n as f64;
            let im = partial.iter().map(|p| p[k].1).sum::<f64>() / n as f64;
            let exact = (-xi.powf(params.alpha())).exp();
            CfProbe {
                xi,
                re,
                im,
                exact,
                error: ((re - exact).powi(2) + im * im).sqrt(),
            }
        })
        .collect())
}

/// Log-log slope of the tabulated `p(1, r)` over the last decade of radii.
pub fn tail_slope(table: &KernelTable) -> f64 {
    let r_max = table.r_max();
    let pts: Vec<(f64, f64)> = table
        .radii()
        .iter()
        .zip(table.values())
        .filter(|(r, v)| **r >= r_max / 10.0 && **v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    fit_line(&pts).map_or(f64::NAN, |(s, _)| s)
}

fn bound_grids(dim: usize, nt: usize, nx: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let ts = (0..nt).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / (nt - 1) as f64)).collect();
    let point = |r: f64| {
        let mut x = vec![0.0; dim];
        x[0] = r;
        x
    };
    let mut xs = vec![point(0.0)];
    xs.extend((0..nx).map(|i| point(10f64.powf(-3.0 + 6.0 * i as f64 / (nx - 1) as f64))));
    (ts, xs)
}

fn rel_change(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

pub(super) fn kernel_table(cfg: &ExperimentConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let k = section(&cfg.kernel, "kernel")?;
    let table = load_kernel(ctx, k)?;
    let mut buf = Vec::new();
    table.write_to(&mut buf).context("encoding the kernel table")?;
    ctx.write_bytes("kernel.skt", &buf)?;
    let rows: Vec<Vec<String>> = table.radii().iter().zip(table.values()).map(|(r, v)| row(&[*r, *v])).collect();
    ctx.write_csv("kernel_profile.csv", &["r", "p_1_r"], &rows)?;

    let exact = k.params.density_at_origin();
    let origin = table.values()[0];
    ctx.check("origin_value", (origin - exact).abs() <= 1e-6, (origin - exact).abs(), Some(1e-6), format!("p(1,0) = {origin}"));
    ctx.check("mass", (table.mass() - 1.0).abs() <= 1e-5, (table.mass() - 1.0).abs(), Some(1e-5), "");
    ctx.scalar("density_at_origin", origin);
    ctx.scalar("mass", table.mass());
    ctx.scalar("tail_constant", table.tail_constant());
    ctx.scalar("r_max", table.r_max());
    Ok(())
}

pub(super) fn verify_kernel(cfg: &ExperimentConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let k = section(&cfg.kernel, "kernel")?;
    let v = section(&cfg.verify_kernel, "verify_kernel")?;
    let params = k.params;
    let d = params.dim();
    let table = load_kernel(ctx, k)?;

    ctx.progress(format!("sampling {} increments", v.samples));
    let cf = characteristic_function_errors(&params, v.samples, &v.probes, cfg.seed).context("sampling increments")?;
    let rows: Vec<Vec<String>> = cf.iter().map(|p| row(&[p.xi, p.re, p.im, p.exact, p.error])).collect();
    ctx.write_csv("characteristic_function.csv", &["xi", "re", "im", "exact", "error"], &rows)?;
    let worst = cf.iter().map(|p| p.error).fold(0.0, f64::max);
    ctx.check("sampler_cf", worst <= v.cf_tolerance, worst, Some(v.cf_tolerance), format!("{} probes", cf.len()));

    let origin = p_alpha(1.0, &vec![0.0; d], &table).context("evaluating p(1,0)")?;
    let exact = params.density_at_origin();
    let err = (origin - exact).abs();
    ctx.check("origin_value", err <= v.origin_tolerance, err, Some(v.origin_tolerance), format!("p(1,0) = {origin}"));
    if v.gaussian_oracle {
        let gauss = build_kernel_table(StableParams::extended(2.0, d).context("Gaussian parameters")?, 200)
            .context("tabulating the Gaussian kernel")?;
        let g0 = p_alpha(1.0, &vec![0.0; d], &gauss).context("evaluating the Gaussian kernel")?;
        let oracle = (4.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0);
        let err = (g0 - oracle).abs();
        ctx.check("gaussian_oracle", err <= v.origin_tolerance, err, Some(v.origin_tolerance), format!("p(1,0) = {g0}"));
    }
    let slope = tail_slope(&table);
    let target = -(d as f64 + params.alpha());
    let rel = (slope / target - 1.0).abs();
    ctx.check("tail_slope", rel <= v.tail_tolerance, rel, Some(v.tail_tolerance), format!("slope {slope}, expected {target}"));
    ctx.scalar("tail_slope", slope);

    ctx.progress("evaluating the kernel bounds on two grids");
    let (t1, x1) = bound_grids(d, v.bound_times, v.bound_points);
    let (t2, x2) = bound_grids(d, 2 * v.bound_times - 1, 2 * v.bound_points);
    let coarse = kernel_bound_report(&table, &t1, &x1).context("kernel bound report")?;
    let fine = kernel_bound_report(&table, &t2, &x2).context("kernel bound report (refined)")?;
    #[derive(Serialize)]
    struct Bounds<'a> {
        coarse: &'a BoundReport,
        fine: &'a BoundReport,
    }
    ctx.write_json("bounds.json", &Bounds { coarse: &coarse, fine: &fine })?;
    let ok = coarse.two_sided_min > 0.0 && coarse.two_sided_max.is_finite();
    ctx.check(
        "two_sided_bound",
        ok,
        coarse.two_sided_max / coarse.two_sided_min,
        None,
        format!("p/rho in [{}, {}]", coarse.two_sided_min, coarse.two_sided_max),
    );
    let change = rel_change(coarse.two_sided_min, fine.two_sided_min).max(rel_change(coarse.two_sided_max, fine.two_sided_max));
    ctx.check("two_sided_refinement", change < v.refinement_tolerance, change, Some(v.refinement_tolerance), "");
    ctx.scalar("two_sided_min", fine.two_sided_min);
    ctx.scalar("two_sided_max", fine.two_sided_max);
    ctx.scalar("gradient_constant", fine.gradient_max);
    ctx.scalar("doubling_constant", fine.doubling_max);
    ctx.scalar("frac_laplacian_constant", fine.frac_laplacian_max);
    for h in &fine.space_holder {
        ctx.scalar(&format!("space_holder_C_{}", h.beta), h.constant);
    }
    for h in &fine.time_holder {
        ctx.scalar(&format!("time_holder_C_{}", h.beta), h.constant);
    }

    if d == 1 {
        ctx.progress("convolution defects");
        let defects = v
            .ck_steps
            .iter()
            .map(|&h| ck_defect(&table, 1.0, 1.0, v.ck_half_width, h))
            .collect::<stable_ddsde::Result<Vec<f64>>>()
            .context("convolution defect")?;
        let rows: Vec<Vec<String>> = v.ck_steps.iter().zip(&defects).map(|(h, e)| row(&[*h, *e])).collect();
        ctx.write_csv("chapman_kolmogorov.csv", &["step", "l1_defect"], &rows)?;
        ctx.series("ck_defect", v.ck_steps.iter().cloned().zip(defects.iter().cloned()));
        let last = *defects.last().unwrap();
        ctx.check("ck_defect", last <= v.ck_tolerance, last, Some(v.ck_tolerance), format!("step {}", v.ck_steps.last().unwrap()));
        if defects.len() >= 2 {
            // each step ratio should shrink the defect by at least the same factor
            let worst = v
                .ck_steps
                .windows(2)
                .zip(defects.windows(2))
                .map(|(h, e)| (e[0] / e[1]) / (h[0] / h[1]))
                .fold(f64::INFINITY, f64::min);
            ctx.check("ck_halving", worst >= 1.0, worst, Some(1.0), "defect ratio over step ratio, worst pair");
        }
    }

    ctx.progress("heat equation residual");
    let res = heat_equation_residual(&table, v.heat_time, v.heat_extent, v.heat_points).context("heat equation residual")?;
    ctx.check("heat_residual", res <= v.heat_tolerance, res, Some(v.heat_tolerance), format!("t = {}", v.heat_time));
    Ok(())
}
