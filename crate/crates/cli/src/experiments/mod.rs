//! One runner per experiment kind. Each writes its artifacts through the
//! [`RunContext`] and records pass/fail lines; module errors abort the run.

mod besov;
mod kernel;
mod particles;
mod pde;

pub use besov::holder_test_functions;
pub use kernel::{characteristic_function_errors, tail_slope};

use stable_ddsde::stable::build_kernel_table;
use stable_ddsde::{GridFunction, KernelTable};

use crate::config::{ExperimentConfig, ExperimentKind, KernelSection};
use crate::error::{CliError, Context};
use crate::record::{fmt_num, RunContext, RunRecord};
use crate::report;

/// Runs one validated experiment and writes its record. A module error
/// still writes the record (status `error`) and a `FAILED` marker before
/// it is returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord, CliError> {
    let mut ctx = RunContext::create(cfg.kind, &cfg.output_dir)?;
    ctx.progress(format!("seed {}, writing to {}", cfg.seed, cfg.output_dir.display()));
    let snapshot = toml::to_string(&cfg.snapshot).map_err(|e| CliError::Other(e.to_string()))?;
    ctx.write_bytes("config.toml", snapshot.as_bytes())?;
    let outcome = dispatch(cfg, &mut ctx);
    let config = serde_json::to_value(&cfg.snapshot).map_err(|e| CliError::Other(e.to_string()))?;
    match outcome {
        Ok(()) => {
            let rec = ctx.finish(cfg.seed, config, None)?;
            let failed = rec.assertions.iter().filter(|a| !a.passed).count();
            eprintln!(
                "[{}] {} ({} assertions, {failed} failed)",
                cfg.kind,
                if rec.passed() { "passed" } else { "FAILED" },
                rec.assertions.len()
            );
            Ok(rec)
        }
        Err(e) => {
            ctx.progress(format!("error: {e}"));
            ctx.finish(cfg.seed, config, Some(&e))?;
            Err(e)
        }
    }
}

fn dispatch(cfg: &ExperimentConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    match cfg.kind {
        ExperimentKind::KernelTable => kernel::kernel_table(cfg, ctx),
        ExperimentKind::VerifyKernel => kernel::verify_kernel(cfg, ctx),
        ExperimentKind::VerifyBesov => besov::verify_besov(cfg, ctx),
        ExperimentKind::SimulatePde => pde::simulate_pde(cfg, ctx),
        ExperimentKind::SimulateParticles => particles::simulate_particles(cfg, ctx),
        ExperimentKind::Convergence => particles::convergence(cfg, ctx),
        ExperimentKind::Uniqueness => particles::uniqueness(cfg, ctx),
        ExperimentKind::Report => {
            let runs = cfg.report.as_ref().map(|r| r.runs.clone()).unwrap_or_default();
            report::render_into(&runs, ctx)
        }
    }
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    s.as_ref().ok_or_else(|| CliError::Other(format!("validated config lacks the [{name}] section")))
}

fn load_kernel(ctx: &RunContext, k: &KernelSection) -> Result<KernelTable, CliError> {
    match &k.table {
        Some(path) => {
            ctx.progress(format!("loading kernel table {}", path.display()));
            let t = KernelTable::load(path).context(format!("loading {}", path.display()))?;
            if t.params().alpha() != k.params.alpha() || t.params().dim() != k.params.dim() {
                return Err(CliError::Other(format!(
                    "{} holds alpha {} in dimension {}, the config asks for alpha {} in dimension {}",
                    path.display(),
                    t.params().alpha(),
                    t.params().dim(),
                    k.params.alpha(),
                    k.params.dim()
                )));
            }
            Ok(t)
        }
        None => {
            ctx.progress(format!(
                "tabulating p(1, r) for alpha {} in dimension {} at {} radii",
                k.params.alpha(),
                k.params.dim(),
                k.radii
            ));
            build_kernel_table(k.params, k.radii).context("tabulating the kernel")
        }
    }
}

fn grid_csv(ctx: &mut RunContext, rel: &str, f: &GridFunction) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f.write_csv(&mut buf).context(format!("writing {rel}"))?;
    ctx.write_bytes(rel, &buf)
}

fn row(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| fmt_num(*v)).collect()
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn fit_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    hi / lo
}
