use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use stable_ddsde_cli::{load_config_with, render_report, run_experiment, CliError, ExperimentKind, Overrides, RunRecord};

/// Worker threads for the parallel parts; unset means one per core.
const THREADS_ENV: &str = "STABLE_DDSDE_THREADS";

#[derive(Parser)]
#[command(name = "stable-ddsde", version, about = "Stable-driven density-dependent SDE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML); `--family` is accepted for convergence runs
    #[arg(long, short, visible_alias = "family")]
    config: PathBuf,
    /// Output directory, overriding `output_dir`
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Master seed, overriding `seed`
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate p(1, r) and write it as a kernel file
    KernelTable(Common),
    /// Sampler, kernel values, bounds, convolution and heat checks
    VerifyKernel(Common),
    /// Littlewood-Paley decay, Schauder constant, Hölder/Besov equivalence
    VerifyBesov(Common),
    /// Solve the nonlinear Fokker-Planck equation on the grid
    SimulatePde(Common),
    /// Run the interacting particle Euler scheme
    SimulateParticles(Common),
    /// `simulate pde` and `simulate particles`, same as the hyphenated forms
    Simulate {
        #[command(subcommand)]
        target: SimulateTarget,
    },
    /// Error table over a family of step and particle counts
    Convergence(Common),
    /// Two independent particle runs against one reference
    Uniqueness(Common),
    /// Summarize finished runs into a CSV and plots
    Report {
        /// Run directories; when given, `--config` is optional
        runs: Vec<PathBuf>,
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SimulateTarget {
    Pde(Common),
    Particles(Common),
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn experiment(kind: ExperimentKind, c: Common) -> Result<RunRecord, CliError> {
    let ov = Overrides {
        kind: Some(kind),
        output_dir: c.out,
        seed: c.seed,
    };
    let cfg = load_config_with(&c.config, &ov)?;
    run_experiment(&cfg)
}

fn dispatch(cmd: Command) -> Result<RunRecord, CliError> {
    use ExperimentKind as K;
    match cmd {
        Command::KernelTable(c) => experiment(K::KernelTable, c),
        Command::VerifyKernel(c) => experiment(K::VerifyKernel, c),
        Command::VerifyBesov(c) => experiment(K::VerifyBesov, c),
        Command::SimulatePde(c) => experiment(K::SimulatePde, c),
        Command::SimulateParticles(c) | Command::Simulate { target: SimulateTarget::Particles(c) } => {
            experiment(K::SimulateParticles, c)
        }
        Command::Simulate { target: SimulateTarget::Pde(c) } => experiment(K::SimulatePde, c),
        Command::Convergence(c) => experiment(K::Convergence, c),
        Command::Uniqueness(c) => experiment(K::Uniqueness, c),
        Command::Report { runs, config: None, out } => {
            if runs.is_empty() {
                return Err(CliError::Other("report needs run directories or --config".into()));
            }
            render_report(&runs, &out.unwrap_or_else(|| PathBuf::from("report")))
        }
        Command::Report { runs, config: Some(config), out } => {
            let ov = Overrides {
                kind: Some(K::Report),
                output_dir: out,
                seed: None,
            };
            let mut cfg = load_config_with(&config, &ov)?;
            if !runs.is_empty() {
                if let Some(r) = cfg.report.as_mut() {
                    r.runs = runs;
                }
            }
            run_experiment(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match dispatch(cli.command) {
        Ok(rec) if rec.passed() => ExitCode::SUCCESS,
        Ok(rec) => {
            for a in rec.assertions.iter().filter(|a| !a.passed) {
                eprintln!("failed: {} {}", a.name, a.detail);
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
