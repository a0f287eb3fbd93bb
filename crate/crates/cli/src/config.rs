//! Experiment configuration: TOML text, validated in full before any
//! computation starts.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt;
use std::path::{Path, PathBuf};
use toml::{Table, Value};

use stable_ddsde::besov::{build_partition, TorusGrid};
use stable_ddsde::euler::{Bandwidth, EulerConfig};
use stable_ddsde::fokker_planck::{DriftSpec, InitialDensity, SolverOptions};
use stable_ddsde::StableParams;

use crate::error::{CliError, ConfigIssue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    KernelTable,
    VerifyKernel,
    VerifyBesov,
    SimulatePde,
    SimulateParticles,
    Convergence,
    Uniqueness,
    Report,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::KernelTable,
        ExperimentKind::VerifyKernel,
        ExperimentKind::VerifyBesov,
        ExperimentKind::SimulatePde,
        ExperimentKind::SimulateParticles,
        ExperimentKind::Convergence,
        ExperimentKind::Uniqueness,
        ExperimentKind::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::KernelTable => "kernel-table",
            ExperimentKind::VerifyKernel => "verify-kernel",
            ExperimentKind::VerifyBesov => "verify-besov",
            ExperimentKind::SimulatePde => "simulate-pde",
            ExperimentKind::SimulateParticles => "simulate-particles",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Uniqueness => "uniqueness",
            ExperimentKind::Report => "report",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    fn needs_model(self) -> bool {
        matches!(
            self,
            ExperimentKind::SimulatePde
                | ExperimentKind::SimulateParticles
                | ExperimentKind::Convergence
                | ExperimentKind::Uniqueness
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Stable law and its tabulated kernel.
#[derive(Debug, Clone)]
pub struct KernelSection {
    pub params: StableParams,
    pub radii: usize,
    /// Load the kernel from this file instead of tabulating it.
    pub table: Option<PathBuf>,
}

/// PDE/particle grid, drift and initial law.
#[derive(Debug, Clone)]
pub struct ModelSection {
    pub grid: TorusGrid,
    pub drift: DriftSpec,
    pub initial: InitialDensity,
}

#[derive(Debug, Clone)]
pub struct VerifyKernelSection {
    pub samples: usize,
    pub probes: Vec<f64>,
    pub cf_tolerance: f64,
    pub origin_tolerance: f64,
    pub gaussian_oracle: bool,
    pub tail_tolerance: f64,
    pub bound_times: usize,
    pub bound_points: usize,
    pub refinement_tolerance: f64,
    pub ck_steps: Vec<f64>,
    pub ck_half_width: f64,
    pub ck_tolerance: f64,
    pub heat_time: f64,
    pub heat_extent: f64,
    pub heat_points: usize,
    pub heat_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct BesovSection {
    pub lp_alphas: Vec<f64>,
    pub lp_extent: f64,
    pub lp_points: usize,
    pub lp_j_max: i32,
    pub lp_j_min_fit: i32,
    pub lp_j_max_fit: i32,
    pub lp_time: f64,
    pub lp_tolerance: f64,
    pub schauder_samples: usize,
    pub schauder_beta: f64,
    pub schauder_time: f64,
    pub schauder_points: usize,
    pub schauder_j_max: i32,
    pub schauder_tolerance: f64,
    pub holder_betas: Vec<f64>,
    pub holder_functions: usize,
    pub holder_points: usize,
    pub holder_j_max: i32,
    pub equivalence_bound: f64,
}

#[derive(Debug, Clone)]
pub struct GronwallSection {
    pub t_small: Vec<f64>,
    pub steps: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct BootstrapSection {
    pub beta0: f64,
    pub stages: usize,
    pub extent: f64,
    /// One grid per entry; two or more give the refinement check.
    pub points: Vec<usize>,
    pub j_max: i32,
    pub t_final: f64,
    pub steps: usize,
    pub save_every: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct PdeSection {
    pub t_final: f64,
    pub steps: usize,
    pub solver: SolverOptions,
    pub lq_exponent: f64,
    pub gronwall: Option<GronwallSection>,
    pub bootstrap: Option<BootstrapSection>,
}

#[derive(Debug, Clone)]
pub struct DuhamelSection {
    pub x0: Vec<f64>,
    pub paths: usize,
    pub particles: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct ParticleSection {
    /// Template run; `n_steps` and `n_particles` are 0 when the experiment
    /// takes them from elsewhere (the convergence family).
    pub base: EulerConfig,
    pub domination_bound: f64,
    pub region_floor: f64,
    pub holder_beta: Option<f64>,
    pub reference_steps: Option<usize>,
    pub error_tolerance: f64,
    pub duhamel: Option<DuhamelSection>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceSection {
    pub family: Vec<EulerConfig>,
    pub reference_steps: usize,
    pub final_tolerance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct UniquenessSection {
    pub seed_b: u64,
    pub reference_steps: usize,
}

#[derive(Debug, Clone)]
pub struct ReportSection {
    pub runs: Vec<PathBuf>,
}

/// A fully validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// The parsed text with command-line overrides applied, minus `output_dir`.
    pub snapshot: Table,
    pub kernel: Option<KernelSection>,
    pub model: Option<ModelSection>,
    pub verify_kernel: Option<VerifyKernelSection>,
    pub besov: Option<BesovSection>,
    pub pde: Option<PdeSection>,
    pub particles: Option<ParticleSection>,
    pub convergence: Option<ConvergenceSection>,
    pub uniqueness: Option<UniquenessSection>,
    pub report: Option<ReportSection>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<ExperimentKind>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, CliError> {
    load_config_with(path, &Overrides::default())
}

pub fn load_config_with(path: impl AsRef<Path>, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path, overrides)
}

/// Parses and validates config text; `origin` only labels parse errors.
pub fn parse_config(text: &str, origin: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let table: Table = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        CliError::Parse {
            path: origin.to_path_buf(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    validate(table, overrides)
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[derive(Default)]
struct Reader {
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn issue(&mut self, key: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            key: key.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, key: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.issue(key, message);
        }
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "a string",
        Value::Integer(_) => "an integer",
        Value::Float(_) => "a float",
        Value::Boolean(_) => "a boolean",
        Value::Datetime(_) => "a datetime",
        Value::Array(_) => "an array",
        Value::Table(_) => "a table",
    }
}

/// One table of the config; remembers which keys were read so that the
/// rest can be reported as unknown.
struct Sec<'t> {
    path: String,
    table: Option<&'t Table>,
    seen: Vec<String>,
}

impl<'t> Sec<'t> {
    fn root(table: &'t Table) -> Self {
        Sec {
            path: String::new(),
            table: Some(table),
            seen: Vec::new(),
        }
    }

    fn child(&mut self, r: &mut Reader, name: &str) -> Sec<'t> {
        let path = self.key(name);
        let table = match self.raw(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(v) => {
                r.issue(&path, format!("expected a table, found {}", type_name(v)));
                None
            }
        };
        Sec {
            path,
            table,
            seen: Vec::new(),
        }
    }

    fn present(&self) -> bool {
        self.table.is_some()
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn raw(&mut self, k: &str) -> Option<&'t Value> {
        self.seen.push(k.to_string());
        self.table.and_then(|t| t.get(k))
    }

    fn has(&self, k: &str) -> bool {
        self.table.is_some_and(|t| t.contains_key(k))
    }

    fn number(&mut self, r: &mut Reader, k: &str) -> Option<f64> {
        let key = self.key(k);
        match self.raw(k)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            v => {
                r.issue(key, format!("expected a number, found {}", type_name(v)));
                None
            }
        }
    }

    fn num(&mut self, r: &mut Reader, k: &str, default: f64) -> f64 {
        self.number(r, k).unwrap_or(default)
    }

    fn integer(&mut self, r: &mut Reader, k: &str) -> Option<u64> {
        let key = self.key(k);
        match self.raw(k)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::Integer(i) => {
                r.issue(key, format!("must be non-negative, got {i}"));
                None
            }
            v => {
                r.issue(key, format!("expected an integer, found {}", type_name(v)));
                None
            }
        }
    }

    fn count(&mut self, r: &mut Reader, k: &str, default: usize) -> usize {
        self.integer(r, k).map_or(default, |v| v as usize)
    }

    fn req_count(&mut self, r: &mut Reader, k: &str) -> Option<usize> {
        if !self.has(k) {
            self.seen.push(k.to_string());
            r.issue(self.key(k), "missing required key");
            return None;
        }
        self.integer(r, k).map(|v| v as usize)
    }

    fn level(&mut self, r: &mut Reader, k: &str, default: i32) -> i32 {
        let key = self.key(k);
        match self.raw(k) {
            None => default,
            Some(Value::Integer(i)) if (-1..=30).contains(i) => *i as i32,
            Some(v) => {
                r.issue(key, format!("expected an integer in [-1, 30], found {v}"));
                default
            }
        }
    }

    fn flag(&mut self, r: &mut Reader, k: &str, default: bool) -> bool {
        let key = self.key(k);
        match self.raw(k) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                r.issue(key, format!("expected a boolean, found {}", type_name(v)));
                default
            }
        }
    }

    fn text(&mut self, r: &mut Reader, k: &str) -> Option<String> {
        let key = self.key(k);
        match self.raw(k)? {
            Value::String(s) => Some(s.clone()),
            v => {
                r.issue(key, format!("expected a string, found {}", type_name(v)));
                None
            }
        }
    }

    fn list<T>(&mut self, r: &mut Reader, k: &str, default: Vec<T>, item: impl Fn(&Value) -> Option<T>) -> Vec<T> {
        let key = self.key(k);
        match self.raw(k) {
            None => default,
            Some(Value::Array(a)) => {
                let parsed: Option<Vec<T>> = a.iter().map(&item).collect();
                match parsed {
                    Some(v) if !v.is_empty() => v,
                    Some(_) => {
                        r.issue(key, "must not be empty");
                        default
                    }
                    None => {
                        r.issue(key, "has an entry of the wrong type");
                        default
                    }
                }
            }
            Some(v) => {
                r.issue(key, format!("expected an array, found {}", type_name(v)));
                default
            }
        }
    }

    fn numbers(&mut self, r: &mut Reader, k: &str, default: &[f64]) -> Vec<f64> {
        self.list(r, k, default.to_vec(), |v| match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        })
    }

    fn counts(&mut self, r: &mut Reader, k: &str, default: &[usize]) -> Vec<usize> {
        self.list(r, k, default.to_vec(), |v| match v {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            _ => None,
        })
    }

    /// Deserializes this whole table with serde.
    fn typed<T: DeserializeOwned>(&mut self, r: &mut Reader) -> Option<T> {
        let t = self.table?;
        self.seen.extend(t.keys().cloned());
        match Value::Table(t.clone()).try_into::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                r.issue(self.path.clone(), e.message().trim().to_string());
                None
            }
        }
    }

    fn finish(self, r: &mut Reader) {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !self.seen.iter().any(|s| s == k) {
                    r.issue(self.key(k), "unknown key");
                }
            }
        }
    }
}

fn core_message(e: stable_ddsde::Error) -> String {
    match e {
        stable_ddsde::Error::Parameter(m) | stable_ddsde::Error::Precondition(m) => m,
        other => other.to_string(),
    }
}

fn positive(r: &mut Reader, key: String, v: f64) {
    r.check(v > 0.0 && v.is_finite(), key, format!("must be positive and finite, got {v}"));
}

fn validate(mut table: Table, ov: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut r = Reader::default();
    if let Some(k) = ov.kind {
        if let Some(Value::String(s)) = table.get("kind") {
            if s != k.name() {
                r.issue("kind", format!("config is for `{s}` but the subcommand is `{k}`"));
            }
        }
        table.insert("kind".into(), Value::String(k.name().into()));
    }
    if let Some(seed) = ov.seed {
        match i64::try_from(seed) {
            Ok(s) => {
                table.insert("seed".into(), Value::Integer(s));
            }
            Err(_) => r.issue("seed", format!("seed {seed} does not fit a signed 64-bit integer")),
        }
    }
    if let Some(out) = &ov.output_dir {
        table.insert("output_dir".into(), Value::String(out.to_string_lossy().into_owned()));
    }

    let mut root = Sec::root(&table);
    let kind = match root.text(&mut r, "kind") {
        Some(s) => match ExperimentKind::from_name(&s) {
            Some(k) => Some(k),
            None => {
                let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                r.issue("kind", format!("unknown experiment `{s}`, expected one of {}", names.join(", ")));
                None
            }
        },
        None => {
            if !root.has("kind") {
                r.issue("kind", "missing required key");
            }
            None
        }
    };
    let seed = root.integer(&mut r, "seed").unwrap_or(0);
    let output_dir = PathBuf::from(root.text(&mut r, "output_dir").unwrap_or_else(|| "out".into()));

    let Some(kind) = kind else {
        return Err(CliError::Invalid(r.issues));
    };

    let mut cfg = ExperimentConfig {
        kind,
        seed,
        output_dir,
        snapshot: Table::new(),
        kernel: None,
        model: None,
        verify_kernel: None,
        besov: None,
        pde: None,
        particles: None,
        convergence: None,
        uniqueness: None,
        report: None,
    };

    if kind != ExperimentKind::Report {
        let mut s = root.child(&mut r, "kernel");
        cfg.kernel = read_kernel(&mut r, &mut s);
        s.finish(&mut r);
    }
    let params = cfg.kernel.as_ref().map(|k| k.params);

    if kind.needs_model() {
        cfg.model = read_model(&mut r, &mut root, params);
    }

    match kind {
        ExperimentKind::KernelTable => {}
        ExperimentKind::VerifyKernel => {
            let mut s = root.child(&mut r, "verify_kernel");
            cfg.verify_kernel = Some(read_verify_kernel(&mut r, &mut s, params));
            s.finish(&mut r);
        }
        ExperimentKind::VerifyBesov => {
            let mut s = root.child(&mut r, "besov");
            cfg.besov = read_besov(&mut r, &mut s, params);
            s.finish(&mut r);
        }
        ExperimentKind::SimulatePde => {
            let mut s = root.child(&mut r, "pde");
            cfg.pde = read_pde(&mut r, &mut s, params, cfg.model.as_ref());
            s.finish(&mut r);
        }
        ExperimentKind::SimulateParticles | ExperimentKind::Uniqueness => {
            let mut s = root.child(&mut r, "particles");
            cfg.particles = read_particles(&mut r, &mut s, params, cfg.model.as_ref(), seed, true);
            s.finish(&mut r);
            if kind == ExperimentKind::Uniqueness {
                let mut u = root.child(&mut r, "uniqueness");
                let seed_b = u.integer(&mut r, "seed_b").unwrap_or(seed.wrapping_add(1));
                let reference_steps = u.count(&mut r, "reference_steps", 512);
                r.check(reference_steps >= 1, u.key("reference_steps"), "must be at least 1");
                check_reference_cfl(&mut r, u.key("reference_steps"), cfg.particles.as_ref(), cfg.model.as_ref(), reference_steps);
                if let Some(p) = &cfg.particles {
                    divisible(&mut r, u.key("reference_steps"), reference_steps, p.base.n_steps);
                }
                u.finish(&mut r);
                cfg.uniqueness = Some(UniquenessSection { seed_b, reference_steps });
            }
        }
        ExperimentKind::Convergence => {
            let mut s = root.child(&mut r, "particles");
            cfg.particles = read_particles(&mut r, &mut s, params, cfg.model.as_ref(), seed, false);
            s.finish(&mut r);
            let mut c = root.child(&mut r, "convergence");
            cfg.convergence = read_convergence(&mut r, &mut c, cfg.particles.as_ref(), cfg.model.as_ref());
            c.finish(&mut r);
        }
        ExperimentKind::Report => {
            let mut s = root.child(&mut r, "report");
            let runs = s.list(&mut r, "runs", Vec::new(), |v| match v {
                Value::String(p) => Some(PathBuf::from(p)),
                _ => None,
            });
            s.finish(&mut r);
            cfg.report = Some(ReportSection { runs });
        }
    }
    root.finish(&mut r);

    if !r.issues.is_empty() {
        return Err(CliError::Invalid(r.issues));
    }
    table.remove("output_dir");
    cfg.snapshot = table;
    Ok(cfg)
}

fn read_kernel(r: &mut Reader, s: &mut Sec<'_>) -> Option<KernelSection> {
    let alpha = s.num(r, "alpha", 1.5);
    let dim = s.count(r, "dim", 1);
    let radii = s.count(r, "radii", 2048);
    let table = s.text(r, "table").map(PathBuf::from);
    r.check(radii >= 64, s.key("radii"), format!("need at least 64 radii, got {radii}"));
    if let Some(p) = &table {
        r.check(p.is_file(), s.key("table"), format!("no such file {}", p.display()));
    }
    match StableParams::new(alpha, dim) {
        Ok(params) => Some(KernelSection { params, radii, table }),
        Err(e) => {
            let key = if alpha > 1.0 && alpha < 2.0 { s.key("dim") } else { s.key("alpha") };
            r.issue(key, core_message(e));
            None
        }
    }
}

fn read_model(r: &mut Reader, root: &mut Sec<'_>, params: Option<StableParams>) -> Option<ModelSection> {
    let dim = params.map_or(1, |p| p.dim());
    let mut g = root.child(r, "grid");
    let extent = g.num(r, "extent", 80.0);
    let points = g.count(r, "points", 4096);
    let grid = match TorusGrid::new(extent, points, dim) {
        Ok(grid) => Some(grid),
        Err(e) => {
            r.issue("grid", core_message(e));
            None
        }
    };
    g.finish(r);

    let mut d = root.child(r, "drift");
    let drift = if d.present() {
        d.typed::<DriftSpec>(r).and_then(|spec| match DriftSpec::new(spec.components) {
            Ok(spec) if spec.dim() == dim => Some(spec),
            Ok(spec) => {
                r.issue("drift.components", format!("drift has {} components, kernel.dim is {dim}", spec.dim()));
                None
            }
            Err(e) => {
                r.issue("drift", core_message(e));
                None
            }
        })
    } else {
        Some(DriftSpec::zero(dim))
    };
    d.finish(r);

    let mut i = root.child(r, "initial");
    let initial = if i.present() {
        i.typed::<InitialDensity>(r).and_then(|init| match init.validate() {
            Ok(()) if init.dim() == dim => Some(init),
            Ok(()) => {
                r.issue("initial", format!("initial law is {}-d, kernel.dim is {dim}", init.dim()));
                None
            }
            Err(e) => {
                r.issue("initial", core_message(e));
                None
            }
        })
    } else {
        Some(InitialDensity::GaussianMixture {
            weights: vec![1.0],
            means: vec![vec![0.0; dim]],
            sigmas: vec![0.25],
        })
    };
    i.finish(r);

    Some(ModelSection {
        grid: grid?,
        drift: drift?,
        initial: initial?,
    })
}

fn read_verify_kernel(r: &mut Reader, s: &mut Sec<'_>, params: Option<StableParams>) -> VerifyKernelSection {
    let v = VerifyKernelSection {
        samples: s.count(r, "samples", 1_000_000),
        probes: s.numbers(r, "probes", &[0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0]),
        cf_tolerance: s.num(r, "cf_tolerance", 4e-3),
        origin_tolerance: s.num(r, "origin_tolerance", 1e-6),
        gaussian_oracle: s.flag(r, "gaussian_oracle", true),
        tail_tolerance: s.num(r, "tail_tolerance", 0.02),
        bound_times: s.count(r, "bound_times", 9),
        bound_points: s.count(r, "bound_points", 120),
        refinement_tolerance: s.num(r, "refinement_tolerance", 0.2),
        ck_steps: s.numbers(r, "ck_steps", &[0.2, 0.1, 0.05]),
        ck_half_width: s.num(r, "ck_half_width", 60.0),
        ck_tolerance: s.num(r, "ck_tolerance", 1e-3),
        heat_time: s.num(r, "heat_time", 1.0),
        heat_extent: s.num(r, "heat_extent", 80.0),
        heat_points: s.count(r, "heat_points", 4096),
        heat_tolerance: s.num(r, "heat_tolerance", 1e-3),
    };
    r.check(v.samples >= 1000, s.key("samples"), "need at least 1000 samples");
    r.check(v.bound_times >= 2, s.key("bound_times"), "need at least 2 times");
    r.check(v.bound_points >= 2, s.key("bound_points"), "need at least 2 points");
    r.check(v.heat_points >= 16, s.key("heat_points"), "need at least 16 points");
    for (k, x) in [
        ("cf_tolerance", v.cf_tolerance),
        ("origin_tolerance", v.origin_tolerance),
        ("tail_tolerance", v.tail_tolerance),
        ("refinement_tolerance", v.refinement_tolerance),
        ("ck_half_width", v.ck_half_width),
        ("ck_tolerance", v.ck_tolerance),
        ("heat_time", v.heat_time),
        ("heat_extent", v.heat_extent),
        ("heat_tolerance", v.heat_tolerance),
    ] {
        positive(r, s.key(k), x);
    }
    r.check(v.probes.iter().all(|p| *p > 0.0), s.key("probes"), "probes must be positive");
    if let Some(p) = params {
        // the convolution grid must resolve the narrower kernel at s = t = 1
        let needed = 0.25;
        r.check(
            v.ck_steps.iter().all(|h| *h > 0.0 && *h <= needed),
            s.key("ck_steps"),
            format!("steps must lie in (0, {needed}]"),
        );
        if p.dim() != 1 {
            r.issue(s.key("ck_steps"), "the convolution check is one-dimensional; use kernel.dim = 1");
        }
    }
    v
}

fn read_besov(r: &mut Reader, s: &mut Sec<'_>, params: Option<StableParams>) -> Option<BesovSection> {
    let alpha = params.map_or(1.5, |p| p.alpha());
    let b = BesovSection {
        lp_alphas: s.numbers(r, "lp_alphas", &[alpha]),
        lp_extent: s.num(r, "lp_extent", 80.0),
        lp_points: s.count(r, "lp_points", 16384),
        lp_j_max: s.level(r, "lp_j_max", 8),
        lp_j_min_fit: s.level(r, "lp_j_min_fit", 2),
        lp_j_max_fit: s.level(r, "lp_j_max_fit", 7),
        lp_time: s.num(r, "lp_time", 1.0),
        lp_tolerance: s.num(r, "lp_tolerance", 0.15),
        schauder_samples: s.count(r, "schauder_samples", 20),
        schauder_beta: s.num(r, "schauder_beta", 0.6),
        schauder_time: s.num(r, "schauder_time", 1.0),
        schauder_points: s.count(r, "schauder_points", 2048),
        schauder_j_max: s.level(r, "schauder_j_max", 6),
        schauder_tolerance: s.num(r, "schauder_tolerance", 0.25),
        holder_betas: s.numbers(r, "holder_betas", &[0.4, 0.6, 0.8]),
        holder_functions: s.count(r, "holder_functions", 20),
        holder_points: s.count(r, "holder_points", 8192),
        holder_j_max: s.level(r, "holder_j_max", 8),
        equivalence_bound: s.num(r, "equivalence_bound", 10.0),
    };
    let dim = params.map_or(1, |p| p.dim());
    for a in &b.lp_alphas {
        if let Err(e) = StableParams::new(*a, dim) {
            r.issue(s.key("lp_alphas"), core_message(e));
        }
    }
    r.check(
        b.lp_j_min_fit >= 0 && b.lp_j_min_fit < b.lp_j_max_fit && b.lp_j_max_fit <= b.lp_j_max,
        s.key("lp_j_max_fit"),
        "need 0 <= lp_j_min_fit < lp_j_max_fit <= lp_j_max",
    );
    r.check(b.schauder_samples >= 10, s.key("schauder_samples"), "need at least 10 samples");
    r.check(b.holder_functions >= 2, s.key("holder_functions"), "need at least 2 functions");
    r.check(
        b.holder_betas.iter().all(|x| *x > 0.0 && *x < 1.0),
        s.key("holder_betas"),
        "exponents must lie in (0,1)",
    );
    for (k, v) in [
        ("lp_extent", b.lp_extent),
        ("lp_time", b.lp_time),
        ("lp_tolerance", b.lp_tolerance),
        ("schauder_beta", b.schauder_beta),
        ("schauder_time", b.schauder_time),
        ("schauder_tolerance", b.schauder_tolerance),
    ] {
        positive(r, s.key(k), v);
    }
    r.check(b.equivalence_bound >= 1.0, s.key("equivalence_bound"), "must be at least 1");
    // the partitions must fit their grids; building them is cheap
    let besov_extent = 16.0 * std::f64::consts::PI;
    let grids = [
        ("lp_points", b.lp_extent, b.lp_points, b.lp_j_max),
        ("schauder_points", besov_extent, b.schauder_points, b.schauder_j_max),
        ("schauder_points", besov_extent, 2 * b.schauder_points, b.schauder_j_max),
        ("holder_points", besov_extent, b.holder_points, b.holder_j_max),
    ];
    let mut ok = true;
    for (k, extent, points, j_max) in grids {
        let built = TorusGrid::new(extent, points, 1).and_then(|g| build_partition(&g, j_max));
        if let Err(e) = built {
            r.issue(s.key(k), core_message(e));
            ok = false;
        }
    }
    ok.then_some(b)
}

fn read_pde(r: &mut Reader, s: &mut Sec<'_>, params: Option<StableParams>, model: Option<&ModelSection>) -> Option<PdeSection> {
    let t_final = s.num(r, "t_final", 1.0);
    let steps = s.req_count(r, "steps");
    let defaults = SolverOptions::default();
    let solver = SolverOptions {
        save_every: s.count(r, "save_every", defaults.save_every),
        max_outer_mass: s.num(r, "max_outer_mass", defaults.max_outer_mass),
        clip_budget: s.num(r, "clip_budget", defaults.clip_budget),
    };
    let lq_exponent = s.num(r, "lq_exponent", 2.0);
    positive(r, s.key("t_final"), t_final);
    r.check(solver.save_every >= 1, s.key("save_every"), "must be at least 1");
    r.check(
        solver.max_outer_mass > 0.0 && solver.max_outer_mass <= 1.0,
        s.key("max_outer_mass"),
        "must lie in (0,1]",
    );
    positive(r, s.key("clip_budget"), solver.clip_budget);
    r.check(lq_exponent >= 1.0, s.key("lq_exponent"), "must be at least 1");
    if let (Some(steps), Some(m)) = (steps, model) {
        r.check(steps >= 1, s.key("steps"), "must be at least 1");
        if steps >= 1 {
            cfl(r, s.key("steps"), m, t_final / steps as f64);
        }
    }
    let alpha = params.map_or(1.5, |p| p.alpha());

    let mut g = s.child(r, "gronwall");
    let gronwall = g.present().then(|| {
        let t_small = g.numbers(r, "t_small", &[0.05, 0.025, 0.0125]);
        let steps = g.count(r, "steps", 16);
        let tolerance = g.num(r, "tolerance", 0.3);
        r.check(t_small.iter().all(|t| *t > 0.0), g.key("t_small"), "times must be positive");
        r.check(steps >= 1, g.key("steps"), "must be at least 1");
        positive(r, g.key("tolerance"), tolerance);
        if let Some(m) = model {
            let worst = t_small.iter().cloned().fold(0.0, f64::max);
            if steps >= 1 {
                cfl(r, g.key("steps"), m, worst / steps as f64);
            }
        }
        GronwallSection { t_small, steps, tolerance }
    });
    g.finish(r);

    let mut b = s.child(r, "bootstrap");
    let bootstrap = b.present().then(|| {
        let beta0 = b.num(r, "beta0", 0.8);
        let stages = b.count(r, "stages", 2);
        let section = BootstrapSection {
            beta0,
            stages,
            extent: b.num(r, "extent", 16.0 * std::f64::consts::PI),
            points: b.counts(r, "points", &[4096, 8192]),
            j_max: b.level(r, "j_max", 7),
            t_final: b.num(r, "t_final", 0.5),
            steps: b.count(r, "steps", 128),
            save_every: b.count(r, "save_every", 8),
            tolerance: b.num(r, "tolerance", 0.25),
        };
        let lower = 1.0 - alpha / 2.0;
        r.check(
            beta0 > lower && beta0 < 1.0,
            b.key("beta0"),
            format!("must lie in ({lower}, 1) for alpha = {alpha}"),
        );
        let needed = (beta0 / (alpha - 1.0)).ceil() as usize;
        r.check(
            stages >= needed,
            b.key("stages"),
            format!("reaching beta0 = {beta0} needs at least {needed} stages"),
        );
        r.check(section.steps >= 1, b.key("steps"), "must be at least 1");
        r.check(section.save_every >= 1, b.key("save_every"), "must be at least 1");
        positive(r, b.key("t_final"), section.t_final);
        positive(r, b.key("tolerance"), section.tolerance);
        for p in &section.points {
            let built = TorusGrid::new(section.extent, *p, 1).and_then(|g| build_partition(&g, section.j_max).map(|_| g));
            match (built, model) {
                (Err(e), _) => r.issue(b.key("points"), core_message(e)),
                (Ok(g), Some(m)) if section.steps >= 1 => {
                    let bound = m.drift.component_bound();
                    let dt = section.t_final / section.steps as f64;
                    r.check(
                        dt * bound <= g.spacing() / 2.0,
                        b.key("steps"),
                        format!("CFL violated on the {p}-point grid: step {dt} times drift bound {bound} exceeds half the spacing"),
                    );
                }
                _ => {}
            }
        }
        section
    });
    b.finish(r);

    Some(PdeSection {
        t_final,
        steps: steps?,
        solver,
        lq_exponent,
        gronwall,
        bootstrap,
    })
}

fn cfl(r: &mut Reader, key: String, m: &ModelSection, dt: f64) {
    let bound = m.drift.component_bound();
    let h = m.grid.spacing();
    r.check(
        dt * bound <= h / 2.0 * (1.0 + 1e-12),
        key,
        format!("CFL violated: step {dt} times drift bound {bound} exceeds half the spacing {h}"),
    );
}

/// The reference must hold a density at every particle time `k h`.
fn divisible(r: &mut Reader, key: String, reference_steps: usize, n_steps: usize) {
    r.check(
        n_steps > 0 && reference_steps % n_steps == 0,
        key,
        format!("reference_steps ({reference_steps}) must be a multiple of n_steps ({n_steps})"),
    );
}

fn check_reference_cfl(r: &mut Reader, key: String, p: Option<&ParticleSection>, m: Option<&ModelSection>, steps: usize) {
    if let (Some(p), Some(m)) = (p, m) {
        if steps >= 1 {
            cfl(r, key, m, p.base.t_final / steps as f64);
        }
    }
}

fn read_particles(
    r: &mut Reader,
    s: &mut Sec<'_>,
    params: Option<StableParams>,
    model: Option<&ModelSection>,
    seed: u64,
    sized: bool,
) -> Option<ParticleSection> {
    let t_final = s.num(r, "t_final", 1.0);
    let (n_steps, n_particles) = if sized {
        (s.req_count(r, "n_steps"), s.req_count(r, "n_particles"))
    } else {
        (Some(0), Some(0))
    };
    let bandwidth = match s.raw("bandwidth") {
        None => Bandwidth::Silverman,
        Some(Value::String(x)) if x == "silverman" => Bandwidth::Silverman,
        Some(Value::Float(w)) => Bandwidth::Fixed(*w),
        Some(Value::Integer(w)) => Bandwidth::Fixed(*w as f64),
        Some(v) => {
            r.issue(s.key("bandwidth"), format!("expected \"silverman\" or a positive number, found {v}"));
            Bandwidth::Silverman
        }
    };
    let max_outer_mass = s.num(r, "max_outer_mass", 5e-2);
    let domination_bound = s.num(r, "domination_bound", 10.0);
    let region_floor = s.num(r, "region_floor", 2e-2);
    let holder_beta = s.number(r, "holder_beta");
    let reference_steps = s.integer(r, "reference_steps").map(|v| v as usize);
    let error_tolerance = s.num(r, "error_tolerance", 0.05);
    positive(r, s.key("domination_bound"), domination_bound);
    r.check(
        region_floor > 0.0 && region_floor < 1.0,
        s.key("region_floor"),
        "must lie in (0,1)",
    );
    positive(r, s.key("error_tolerance"), error_tolerance);
    if let (Some(b), Some(p)) = (holder_beta, params) {
        let top = p.alpha() - 1.0;
        r.check(b > 0.0 && b < top, s.key("holder_beta"), format!("must lie in (0, {top})"));
    }

    let mut d = s.child(r, "duhamel");
    let duhamel = d.present().then(|| {
        let dim = params.map_or(1, |p| p.dim());
        let x0 = d.numbers(r, "x0", &vec![0.0; dim]);
        let paths = d.count(r, "paths", 10_000);
        let particles = d.count(r, "particles", 100_000);
        let tolerance = d.num(r, "tolerance", 0.05);
        r.check(x0.len() == dim, d.key("x0"), format!("needs {dim} coordinates"));
        r.check(paths >= 1000, d.key("paths"), "need at least 1000 paths");
        r.check(particles >= 1000, d.key("particles"), "need at least 1000 particles");
        positive(r, d.key("tolerance"), tolerance);
        DuhamelSection {
            x0,
            paths,
            particles,
            tolerance,
        }
    });
    d.finish(r);

    let (params, model) = (params?, model?);
    let base = EulerConfig {
        t_final,
        n_steps: n_steps?,
        n_particles: n_particles?,
        bandwidth,
        seed,
        drift: model.drift.clone(),
        alpha: params.alpha(),
        dim: params.dim(),
        initial: model.initial.clone(),
        max_outer_mass,
    };
    if sized {
        if let Err(e) = base.validate() {
            r.issue(s.path.clone(), core_message(e));
            return None;
        }
    } else {
        let probe = EulerConfig {
            n_steps: 2,
            n_particles: 1000,
            ..base.clone()
        };
        if let Err(e) = probe.validate() {
            r.issue(s.path.clone(), core_message(e));
            return None;
        }
    }
    if let Some(steps) = reference_steps {
        r.check(steps >= 1, s.key("reference_steps"), "must be at least 1");
        if steps >= 1 {
            cfl(r, s.key("reference_steps"), model, t_final / steps as f64);
            if sized {
                divisible(r, s.key("reference_steps"), steps, base.n_steps);
            }
        }
    }
    Some(ParticleSection {
        base,
        domination_bound,
        region_floor,
        holder_beta,
        reference_steps,
        error_tolerance,
        duhamel,
    })
}

fn read_convergence(
    r: &mut Reader,
    s: &mut Sec<'_>,
    particles: Option<&ParticleSection>,
    model: Option<&ModelSection>,
) -> Option<ConvergenceSection> {
    let key = s.key("family");
    let family_raw = match s.raw("family") {
        Some(Value::Array(a)) if !a.is_empty() => Some(a.clone()),
        Some(Value::Array(_)) => {
            r.issue(&key, "must not be empty");
            None
        }
        Some(v) => {
            r.issue(&key, format!("expected an array of tables, found {}", type_name(v)));
            None
        }
        None => {
            r.issue(&key, "missing required key");
            None
        }
    };
    let reference_steps = s.count(r, "reference_steps", 512);
    let final_tolerance = s.number(r, "final_tolerance");
    r.check(reference_steps >= 1, s.key("reference_steps"), "must be at least 1");
    check_reference_cfl(r, s.key("reference_steps"), particles, model, reference_steps);
    let base = particles?;
    let mut family = Vec::new();
    let mut complete = true;
    for (i, entry) in family_raw?.iter().enumerate() {
        let ekey = format!("{key}[{i}]");
        let Value::Table(t) = entry else {
            r.issue(ekey, "expected a table with n_steps and n_particles");
            complete = false;
            continue;
        };
        let mut e = Sec {
            path: ekey.clone(),
            table: Some(t),
            seen: Vec::new(),
        };
        let n_steps = e.req_count(r, "n_steps");
        let n_particles = e.req_count(r, "n_particles");
        e.finish(r);
        if let (Some(n_steps), Some(n_particles)) = (n_steps, n_particles) {
            let c = EulerConfig {
                n_steps,
                n_particles,
                ..base.base.clone()
            };
            if reference_steps >= 1 {
                divisible(r, format!("{ekey}.n_steps"), reference_steps, n_steps);
            }
            match c.validate() {
                Ok(()) => family.push(c),
                Err(err) => {
                    r.issue(ekey, core_message(err));
                    complete = false;
                }
            }
        } else {
            complete = false;
        }
    }
    complete.then_some(ConvergenceSection {
        family,
        reference_steps,
        final_tolerance,
    })
}

