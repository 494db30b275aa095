//! Command-line front end: reads a JSON run configuration, dispatches the
//! computation and writes CSV/JSON results.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{BaseGeometry, GeometrySpec};
use crate::harmonic::{harmonic_extension, Exterior};
use crate::invariants::{invariants, mu_direct, mu_formula};
use crate::masschecks::{check_i_sum, check_mass_estimate, check_mu_alpha, InequalityReport};
use crate::minarea::{min_area_graph, min_area_radial, schwarzschild_min_area_oracle, AreaBreakdown};
use crate::profile::{
    alpha_limit, alpha_radial, c_min, check_profile_values, maximizer_diagnostics, AlphaOptions,
    CounterexampleCandidate, MaximizerDiagnostics, PropertyReport,
};
use crate::quadrature::{sphere_quadrature, sphere_quadrature_axisymmetric};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Invariants,
    Mu,
    Alpha,
    Minarea,
    Checks,
    /// Every command above in sequence.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_alpha_iterations")]
    pub alpha_iterations: usize,
    /// Relative slack in the profile property checks.
    #[serde(default = "default_profile_tolerance")]
    pub profile: f64,
}

fn default_alpha_iterations() -> usize {
    30
}

fn default_profile_tolerance() -> f64 {
    1e-3
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { alpha_iterations: default_alpha_iterations(), profile: default_profile_tolerance() }
    }
}

fn default_resolution() -> usize {
    32
}

fn default_starts() -> usize {
    3
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySpec,
    pub command: Command,
    #[serde(rename = "A_values", default)]
    pub a_values: Vec<f64>,
    /// Absolute caps; for each area only the feasible ones are used.
    #[serde(rename = "C_schedule", default)]
    pub c_schedule: Vec<f64>,
    #[serde(rename = "L_max", default)]
    pub l_max: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            // serde names the offending field in backticks
            let field = msg.split('`').nth(1).unwrap_or("config").to_string();
            ConfigError { field, message: msg }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks the fields the command needs and builds the base geometry.
    pub fn validate(&self) -> Result<BaseGeometry, ConfigError> {
        let base = BaseGeometry::from_spec(&self.geometry).map_err(|e| ConfigError::new("geometry", e.to_string()))?;
        if self.resolution == 0 {
            return Err(ConfigError::new("resolution", "must be positive"));
        }
        if self.starts == 0 {
            return Err(ConfigError::new("starts", "must be positive"));
        }
        if base.n() > 3 && self.l_max > 0 {
            return Err(ConfigError::new("L_max", "only radial data (L_max = 0) is supported for n > 3"));
        }
        if self.tolerances.alpha_iterations == 0 {
            return Err(ConfigError::new("tolerances.alpha_iterations", "must be positive"));
        }
        if !(self.tolerances.profile >= 0.0) {
            return Err(ConfigError::new("tolerances.profile", "must be nonnegative"));
        }
        let needs_areas = matches!(self.command, Command::Mu | Command::Alpha | Command::Minarea | Command::All);
        if needs_areas && self.a_values.is_empty() {
            return Err(ConfigError::new("A_values", "required for this command"));
        }
        if let Some(a) = self.a_values.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(ConfigError::new("A_values", format!("areas must be positive and finite, got {a}")));
        }
        if self.a_values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ConfigError::new("A_values", "must be strictly increasing"));
        }
        if matches!(self.command, Command::Alpha | Command::All) {
            if self.c_schedule.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(ConfigError::new("C_schedule", "must be strictly increasing"));
            }
            for &a in &self.a_values {
                let feasible = feasible_caps(&base, a, &self.c_schedule)
                    .map_err(|e| ConfigError::new("geometry", e.to_string()))?;
                if feasible.len() < 2 {
                    return Err(ConfigError::new(
                        "C_schedule",
                        format!("needs at least two caps C >= max(1, (A/|Σ|)^(1/p)) for A = {a}"),
                    ));
                }
            }
        }
        Ok(base)
    }
}

fn feasible_caps(base: &BaseGeometry, area: f64, schedule: &[f64]) -> crate::Result<Vec<f64>> {
    let lower = c_min(base, area)?.max(1.0);
    Ok(schedule.iter().cloned().filter(|c| *c >= lower * (1.0 - 1e-12)).collect())
}

#[derive(Debug, Parser)]
#[command(name = "harmconf", about = "Invariants and area/mass profiles of harmonic conformal classes")]
pub struct Args {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the command in the config.
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    /// Overrides the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Solver(Error),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Solver(e) => write!(f, "solver error: {e}"),
            RunError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Solver(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.into())
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Solver(Error::Integration(_)) => EXIT_NONCONVERGENCE,
            _ => EXIT_INVALID,
        }
    }
}

/// What a run wrote and whether every solver converged.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub nonconverged: Vec<String>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.nonconverged.is_empty() {
            EXIT_OK
        } else {
            EXIT_NONCONVERGENCE
        }
    }
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_json<T: Serialize + ?Sized>(
    dir: &Path,
    name: &str,
    value: &T,
    summary: &mut RunSummary,
) -> Result<(), RunError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::Io(e.into()))?;
    text.push('\n');
    fs::write(&path, text)?;
    summary.files.push(path);
    Ok(())
}

fn search_grid_exterior(base: &BaseGeometry, cfg: &RunConfig) -> crate::Result<std::sync::Arc<Exterior>> {
    let grid = if base.n() == 3 {
        sphere_quadrature(base.dimension(), cfg.l_max, cfg.resolution)?
    } else {
        sphere_quadrature(base.dimension(), 0, 0)?
    };
    Exterior::new(base.clone(), grid)
}

fn run_invariants(base: &BaseGeometry, dir: &Path, s: &mut RunSummary) -> Result<(), RunError> {
    let ext = Exterior::new(base.clone(), sphere_quadrature(base.dimension(), 0, 0)?)?;
    write_json(dir, "invariants.json", &invariants(&ext), s)
}

fn run_mu(base: &BaseGeometry, cfg: &RunConfig, dir: &Path, s: &mut RunSummary) -> Result<(), RunError> {
    let ext = search_grid_exterior(base, cfg)?;
    let inv = invariants(&ext);
    let path = dir.join("mu_profile.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["A", "mu_formula", "mu_direct", "gap"])?;
    for &a in &cfg.a_values {
        let formula = mu_formula(&inv, base.n(), a)?;
        let direct = mu_direct(&ext, a, cfg.starts, cfg.seed)?;
        if !direct.converged {
            s.nonconverged.push(format!("mu_direct at A = {a}"));
        }
        w.write_record([sci(a), sci(formula), sci(direct.mu), sci(formula - direct.mu)])?;
    }
    w.flush()?;
    s.files.push(path);
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinAreaEntry {
    #[serde(rename = "A")]
    pub area: f64,
    /// Constant boundary value of the data.
    pub f: f64,
    pub radial_area: f64,
    pub radial_radius: f64,
    /// Closed form, flat bases only.
    pub oracle: Option<f64>,
    pub graph_area: Option<f64>,
    pub graph_converged: Option<bool>,
    pub breakdown: Option<AreaBreakdown>,
    pub radii: Option<Vec<f64>>,
}

fn run_minarea(base: &BaseGeometry, cfg: &RunConfig, dir: &Path, s: &mut RunSummary) -> Result<(), RunError> {
    let radial = Exterior::new(base.clone(), sphere_quadrature(base.dimension(), 0, 0)?)?;
    let graph_ext = if base.n() == 3 {
        let m = cfg.resolution.max(2);
        Some(Exterior::new(base.clone(), sphere_quadrature_axisymmetric(base.dimension(), m - 1, m)?)?)
    } else {
        None
    };
    let mut out = Vec::new();
    for &a in &cfg.a_values {
        let f = c_min(base, a)?;
        let u = harmonic_extension(&radial, &[f], 1.0)?;
        let (area, sphere) = min_area_radial(&u)?;
        let oracle =
            if base.is_flat() && base.r0() == 1.0 { Some(schwarzschild_min_area_oracle(base.n(), a)?) } else { None };
        let mut entry = MinAreaEntry {
            area: a,
            f,
            radial_area: area,
            radial_radius: sphere.radii[0],
            oracle,
            graph_area: None,
            graph_converged: None,
            breakdown: None,
            radii: None,
        };
        if let Some(ext) = &graph_ext {
            let ug = harmonic_extension(ext, &vec![f; ext.grid().len()], 1.0)?;
            let res = min_area_graph(&ug, None, cfg.starts)?;
            if !res.converged {
                s.nonconverged.push(format!("min_area_graph at A = {a}"));
            }
            entry.graph_area = Some(res.area);
            entry.graph_converged = Some(res.converged);
            entry.breakdown = Some(res.breakdown);
            entry.radii = Some(res.surface.radii.clone());
        }
        out.push(entry);
    }
    write_json(dir, "minarea.json", &out, s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsEntry {
    #[serde(rename = "A")]
    pub area: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub converged: bool,
    pub diagnostics: MaximizerDiagnostics,
}

/// Limit values `α(A)` per area, reused by the checks.
fn run_alpha(
    base: &BaseGeometry,
    cfg: &RunConfig,
    dir: &Path,
    s: &mut RunSummary,
) -> Result<Vec<(f64, f64)>, RunError> {
    let opts = AlphaOptions {
        starts: cfg.starts,
        seed: cfg.seed,
        iterations: cfg.tolerances.alpha_iterations,
        resolution: cfg.resolution,
    };
    let path = dir.join("alpha_profile.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["A", "C", "alpha_C", "alpha_radial", "converged"])?;
    let mut limits = Vec::new();
    let mut candidates: Vec<CounterexampleCandidate> = Vec::new();
    let mut diagnostics = Vec::new();
    for &a in &cfg.a_values {
        let caps = feasible_caps(base, a, &cfg.c_schedule)?;
        let lim = alpha_limit(base, a, &caps, &opts)?;
        if !lim.converged {
            s.nonconverged.push(format!("alpha limit at A = {a}"));
        }
        for r in &lim.trail {
            if !r.converged {
                s.nonconverged.push(format!("alpha_C at A = {a}, C = {}", r.c));
            }
            w.write_record([sci(r.area), sci(r.c), sci(r.value), sci(r.alpha_radial), r.converged.to_string()])?;
            candidates.extend(r.counterexample.clone());
        }
        let last = lim.trail.last().expect("nonempty trail");
        diagnostics.push(DiagnosticsEntry {
            area: a,
            c: last.c,
            converged: last.converged,
            diagnostics: maximizer_diagnostics(base, last)?,
        });
        limits.push((a, lim.value));
    }
    w.flush()?;
    s.files.push(path);
    let areas: Vec<f64> = limits.iter().map(|l| l.0).collect();
    let values: Vec<f64> = limits.iter().map(|l| l.1).collect();
    let report = PropertyReport {
        c: cfg.c_schedule.last().copied().unwrap_or(f64::NAN),
        checks: check_profile_values(&areas, &values, cfg.tolerances.profile),
        areas,
        values,
    };
    write_json(dir, "alpha_properties.json", &report, s)?;
    write_json(dir, "counterexamples.json", &candidates, s)?;
    write_json(dir, "alpha_diagnostics.json", &diagnostics, s)?;
    Ok(limits)
}

fn run_checks(
    base: &BaseGeometry,
    cfg: &RunConfig,
    limits: Option<&[(f64, f64)]>,
    dir: &Path,
    s: &mut RunSummary,
) -> Result<(), RunError> {
    let mut reports: Vec<InequalityReport> = vec![check_i_sum(base)?, check_mass_estimate(base)?];
    for &a in &cfg.a_values {
        // the limit value when computed in this run, else the radial restriction
        let alpha = match limits.and_then(|l| l.iter().find(|x| x.0 == a)) {
            Some(x) => x.1,
            None => alpha_radial(base, a)?,
        };
        reports.push(check_mu_alpha(base, a, alpha)?);
    }
    write_json(dir, "checks.json", &reports, s)
}

/// Runs the configured command, writing into the output directory.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let base = cfg.validate().map_err(RunError::Config)?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let mut s = RunSummary::default();
    match cfg.command {
        Command::Invariants => run_invariants(&base, &dir, &mut s)?,
        Command::Mu => run_mu(&base, cfg, &dir, &mut s)?,
        Command::Alpha => {
            run_alpha(&base, cfg, &dir, &mut s)?;
        }
        Command::Minarea => run_minarea(&base, cfg, &dir, &mut s)?,
        Command::Checks => run_checks(&base, cfg, None, &dir, &mut s)?,
        Command::All => {
            run_invariants(&base, &dir, &mut s)?;
            run_mu(&base, cfg, &dir, &mut s)?;
            run_minarea(&base, cfg, &dir, &mut s)?;
            let limits = run_alpha(&base, cfg, &dir, &mut s)?;
            run_checks(&base, cfg, Some(&limits), &dir, &mut s)?;
        }
    }
    Ok(s)
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var("HP_THREADS") else {
        return Ok(());
    };
    let n: usize =
        v.trim().parse().map_err(|_| ConfigError::new("HP_THREADS", format!("not a thread count: {v:?}")))?;
    if n == 0 {
        return Err(ConfigError::new("HP_THREADS", "must be positive"));
    }
    // a pool may already exist when embedded; the cap is then best effort
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Entry point of the binary; returns the process exit status.
pub fn main_with_args(args: Args) -> i32 {
    if let Err(e) = configure_threads() {
        eprintln!("{e}");
        return EXIT_INVALID;
    }
    let mut cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_INVALID;
        }
    };
    if let Some(c) = args.command {
        cfg.command = c;
    }
    if let Some(o) = args.out {
        cfg.output_dir = o;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    match run(&cfg) {
        Ok(summary) => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for f in &summary.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            for n in &summary.nonconverged {
                eprintln!("not converged: {n}");
            }
            summary.exit_code()
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
