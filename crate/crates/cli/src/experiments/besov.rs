use stable_ddsde::besov::{besov_norm, build_partition, holder_norm, lp_heat_integral, schauder_constant, Exponent};
use stable_ddsde::stable::build_kernel_table;
use stable_ddsde::{GridFunction, StableParams, TorusGrid};
use std::f64::consts::PI;

use super::{fit_line, row, section};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Context};
use crate::record::RunContext;

/// `count` functions of exact Hölder order `beta` on the line: shifted and
/// dilated `|sin|^beta` cusps, and truncated parabolas `max(0, 1 - x^2)^beta`.
pub fn holder_test_functions(beta: f64, grid: &TorusGrid, count: usize) -> Vec<(String, GridFunction)> {
    (0..count)
        .map(|k| {
            let i = k / 2;
            if k % 2 == 0 {
                let freq = [0.25, 0.5, 0.75, 1.0, 1.25][i % 5];
                let phase = 0.3 * i as f64;
                let f = GridFunction::from_fn(grid, |x| (freq * x[0] + phase).sin().abs().powf(beta));
                (format!("cusp_{freq}_{phase:.1}"), f)
            } else {
                let width = 1.0 + 0.5 * i as f64;
                let center = -4.0 + 0.8 * i as f64;
                let f = GridFunction::from_fn(grid, |x| (1.0 - ((x[0] - center) / width).powi(2)).max(0.0).powf(beta));
                (format!("bump_{width}_{center:.1}"), f)
            }
        })
        .collect()
}

pub(super) fn verify_besov(cfg: &ExperimentConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let k = section(&cfg.kernel, "kernel")?;
    let b = section(&cfg.besov, "besov")?;
    if k.params.dim() != 1 {
        return Err(CliError::Other("the Besov checks are one-dimensional".into()));
    }

    let lp_grid = TorusGrid::new(b.lp_extent, b.lp_points, 1).context("block heat grid")?;
    let lp_part = build_partition(&lp_grid, b.lp_j_max).context("block heat partition")?;
    let mut lp_rows = Vec::new();
    for &alpha in &b.lp_alphas {
        ctx.progress(format!("block heat integrals for alpha {alpha}"));
        let table = build_kernel_table(StableParams::new(alpha, 1).context("kernel parameters")?, k.radii)
            .context("tabulating the kernel")?;
        let mut pts = Vec::new();
        let mut doubling = Vec::new();
        for j in -1..=b.lp_j_max_fit {
            let one = lp_heat_integral(j, b.lp_time, &table, &lp_part).context(format!("I_{j}"))?;
            let two = lp_heat_integral(j, 2.0 * b.lp_time, &table, &lp_part).context(format!("I_{j} at 2T"))?;
            lp_rows.push(row(&[alpha, j as f64, one.value, two.value, one.value.log2()]));
            if j >= b.lp_j_min_fit {
                pts.push((j as f64, one.value.log2()));
            }
            if j >= 4 {
                doubling.push(two.value / one.value);
            }
            if j == -1 {
                ctx.check("lp_low_block_finite", one.value.is_finite(), one.value, None, format!("alpha {alpha}"));
            }
        }
        let slope = fit_line(&pts).map_or(f64::NAN, |(s, _)| s);
        let dev = (slope + alpha).abs();
        ctx.check(
            &format!("lp_slope_alpha_{alpha}"),
            dev <= b.lp_tolerance,
            dev,
            Some(b.lp_tolerance),
            format!("slope {slope} over j = {}..{}", b.lp_j_min_fit, b.lp_j_max_fit),
        );
        if !doubling.is_empty() {
            let ok = doubling.iter().all(|r| (1.0..=2.2).contains(r));
            let worst = doubling.iter().cloned().fold(0.0, f64::max);
            ctx.check(&format!("lp_time_doubling_alpha_{alpha}"), ok, worst, Some(2.2), "I_j(2T)/I_j(T) in [1, 2.2] for j >= 4");
        }
        ctx.scalar(&format!("lp_slope_alpha_{alpha}"), slope);
        ctx.series(&format!("lp_decay_alpha_{alpha}"), pts);
    }
    ctx.write_csv("lp_decay.csv", &["alpha", "j", "I_j_T", "I_j_2T", "log2_I_j_T"], &lp_rows)?;

    let alpha = k.params.alpha();
    let besov_extent = 16.0 * PI;
    ctx.progress(format!("Schauder constant from {} samples", b.schauder_samples));
    let coarse = build_partition(&TorusGrid::new(besov_extent, b.schauder_points, 1).context("Schauder grid")?, b.schauder_j_max)
        .context("Schauder partition")?;
    let fine = build_partition(
        &TorusGrid::new(besov_extent, 2 * b.schauder_points, 1).context("Schauder grid")?,
        b.schauder_j_max,
    )
    .context("Schauder partition")?;
    let run = |n: usize, part| schauder_constant(n, alpha, b.schauder_beta, b.schauder_time, part, cfg.seed);
    let base = run(b.schauder_samples, &coarse).context("Schauder constant")?;
    let doubled = run(2 * b.schauder_samples, &coarse).context("Schauder constant (doubled samples)")?;
    let refined = run(b.schauder_samples, &fine).context("Schauder constant (refined grid)")?;
    ctx.write_json("schauder.json", &[&base, &doubled, &refined])?;
    let c = base.constant;
    ctx.check("schauder_finite", c.is_finite() && c > 0.0, c, None, format!("beta {}", b.schauder_beta));
    let change = (doubled.constant / c - 1.0).abs().max((refined.constant / c - 1.0).abs());
    ctx.check(
        "schauder_stability",
        change <= b.schauder_tolerance,
        change,
        Some(b.schauder_tolerance),
        format!("C = {c}, {} with doubled samples, {} on the refined grid", doubled.constant, refined.constant),
    );
    ctx.scalar("schauder_constant", c);

    ctx.progress("Hölder and Besov norms of the test functions");
    let part = build_partition(&TorusGrid::new(besov_extent, b.holder_points, 1).context("Hölder grid")?, b.holder_j_max)
        .context("Hölder partition")?;
    let mut rows = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &beta in &b.holder_betas {
        for (name, f) in holder_test_functions(beta, part.grid(), b.holder_functions) {
            let besov = besov_norm(&f, beta, Exponent::Infinity, Exponent::Infinity, &part).context("Besov norm")?.total;
            let holder = holder_norm(&f, beta).context("Hölder norm")?;
            let ratio = besov / holder;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            rows.push(vec![beta.to_string(), name, crate::record::fmt_num(besov), crate::record::fmt_num(holder), crate::record::fmt_num(ratio)]);
        }
    }
    ctx.write_csv("holder_besov.csv", &["beta", "function", "besov_norm", "holder_norm", "ratio"], &rows)?;
    let c = b.equivalence_bound;
    ctx.check(
        "holder_besov_equivalence",
        lo >= 1.0 / c && hi <= c,
        hi.max(1.0 / lo),
        Some(c),
        format!("ratios in [{lo}, {hi}]"),
    );
    ctx.scalar("equivalence_ratio_min", lo);
    ctx.scalar("equivalence_ratio_max", hi);
    Ok(())
}
