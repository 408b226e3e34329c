//! Command-line front end. [`dispatch`] parses argv, runs one operation and
//! writes either a JSON envelope (`{"schema":"1","command":..,"result":..}`)
//! or CSV.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 numerical failure,
//! 3 red finding under `--fail-on-red`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bvp::{monotone_iteration, solve_annulus, AnnulusBVP, DEFAULT_NODES};
use crate::classify::{classify_with, dirac_from_mu_ratio, estimate_dirac_mass, ClassifyConfig};
use crate::error::{HenonError, Result};
use crate::global::{energy_annulus, energy_identity, nonexistence_sweep, pohozaev_annulus, pohozaev_terms, SweepRow};
use crate::io::{
    fmt_f64, json_string, profile_from_csv, profile_to_csv, radial_from_csv, radial_to_csv, trajectory_to_csv,
};
use crate::numeric::geometric_grid;
use crate::params::{
    classify_regime, compute_exponents, dirac_coefficient, fundamental_solution, mu_coefficient, phi, ProblemParams,
    DEFAULT_CRITICAL_TOL,
};
use crate::phase::{
    classify_orbit, decay_rate, default_h, fixed_points, integrate_orbit, linearize, outgoing_start, vector_field,
    PhaseState, DEFAULT_S_MAX,
};
use crate::radial::{
    exact_singular_solution, integrate_exterior_from, max_abs, ode_residual, rescale_solution, shoot_regular,
    RadialSolution, SolveMeta, ToleranceConfig,
};
use crate::transforms::{inverse, residual, transform, TransformKind};

pub const SCHEMA: &str = "1";
pub const JOBS_ENV: &str = "HENON_RADIAL_JOBS";

/// Relative identity residual above which pohozaev/energy rows are red.
pub const IDENTITY_RED_TOL: f64 = 1e-6;
/// Monotonicity violation above which an iteration trace is red.
pub const MONOTONE_RED_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    Ef,
    LogDelta,
    LogPn,
}

impl From<KindArg> for TransformKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Ef => TransformKind::EmdenFowler,
            KindArg::LogDelta => TransformKind::LogDelta,
            KindArg::LogPn => TransformKind::LogPN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct ParamArgs {
    /// Space dimension.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u32,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub q: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
}

impl ParamArgs {
    fn build(&self) -> Result<ProblemParams> {
        ProblemParams::new(self.n, self.p, self.q, self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct GridArgs {
    #[arg(long = "r-min", default_value_t = 1e-3)]
    pub r_min: f64,
    #[arg(long = "r-max", default_value_t = 10.0)]
    pub r_max: f64,
    /// Number of geometrically spaced radii.
    #[arg(long, default_value_t = 1001)]
    pub points: usize,
}

impl GridArgs {
    fn build(&self) -> Result<Vec<f64>> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return Err(HenonError::InvalidArgument(format!(
                "need 0 < r-min < r-max, got {} and {}",
                self.r_min, self.r_max
            )));
        }
        if self.points < 2 {
            return Err(HenonError::InvalidArgument("need at least 2 points".into()));
        }
        Ok(geometric_grid(self.r_min, self.r_max, self.points))
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RegimeArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long = "critical-tol", default_value_t = DEFAULT_CRITICAL_TOL)]
    pub critical_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GridCmd {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ShootArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub u0: f64,
    #[arg(long = "r-max", default_value_t = 1e4)]
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExteriorArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub u1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub du1: f64,
    #[arg(long = "r-in", default_value_t = 1.0)]
    pub r_in: f64,
    #[arg(long = "r-max", default_value_t = 1e4)]
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RescaleArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// CSV with columns r,u[,flux].
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TransformArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Radial CSV, or a transformed-profile CSV with `--inverse`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = KindArg::LogDelta)]
    pub kind: KindArg,
    /// Map a transformed profile back to radial variables.
    #[arg(long)]
    pub inverse: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub w0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub dw0: Option<f64>,
    /// Start on the origin's outgoing direction at this distance instead.
    #[arg(long, conflicts_with_all = ["w0", "dw0"])]
    pub outgoing: Option<f64>,
    #[arg(long = "s-max", default_value_t = DEFAULT_S_MAX)]
    pub s_max: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LinearizeArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Defaults to λ.
    #[arg(long, allow_hyphen_values = true)]
    pub w: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub dw: f64,
    /// Finite-difference step.
    #[arg(long)]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub input: PathBuf,
    /// Decades of the fitting window above the innermost radius.
    #[arg(long, default_value_t = 2)]
    pub decades: u32,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DiracArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Profile whose Dirac mass is estimated.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Multiple of μ for the closed-form coefficient.
    #[arg(long)]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IdentityArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Profile to test; a regular solution is shot when absent.
    #[arg(long, conflicts_with = "u0")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub u0: Option<f64>,
    #[arg(long = "r-max", default_value_t = 10.0)]
    pub r_max: f64,
    /// Radii at which the identity is evaluated. Defaults to 1/4, 1/2 and
    /// 3/4 of the profile's extent.
    #[arg(long, value_delimiter = ',')]
    pub radius: Vec<f64>,
    /// Inner radius; the identity is then taken over the annulus.
    #[arg(long)]
    pub inner: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [3u32, 4, 5])]
    pub ns: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.5, 2.0, 2.5])]
    pub ps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0])]
    pub alphas: Vec<f64>,
    /// Positions of q inside (p-1, q_sobolev), as fractions of its length.
    #[arg(long = "q-fracs", value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75])]
    pub q_fracs: Vec<f64>,
    /// Extra fractions drawn uniformly from (0.05, 0.95) with `--seed`.
    #[arg(long, default_value_t = 0)]
    pub random: usize,
    #[arg(long, default_value_t = 1.0)]
    pub u0: f64,
    #[arg(long = "r-max", default_value_t = 1e4)]
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BvpArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub ua: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub ub: f64,
    /// Source `g(r) = g_const * r^g_power`.
    #[arg(long = "g-const", default_value_t = 0.0, allow_hyphen_values = true)]
    pub g_const: f64,
    #[arg(long = "g-power", default_value_t = 0.0, allow_hyphen_values = true)]
    pub g_power: f64,
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub nodes: usize,
    /// Bisection tolerance on the flux constant.
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IterateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Boundary value at the inner radius.
    #[arg(long)]
    pub m: f64,
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long = "k-max", default_value_t = 200)]
    pub k_max: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub nodes: usize,
    /// Include every iterate in the JSON output, not only the last.
    #[arg(long = "all-iterates")]
    pub all_iterates: bool,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Derived exponents and the regime.
    Exponents(ParamArgs),
    /// Regime of q relative to the Serrin and Sobolev exponents.
    Regime(RegimeArgs),
    /// The fundamental solution μ on a grid.
    Mu(GridCmd),
    /// Regular solution from the origin.
    Shoot(ShootArgs),
    /// Outward integration from prescribed data at r_in.
    Exterior(ExteriorArgs),
    /// The exact singular solution λ r^{-δ} on a grid.
    Singular(GridCmd),
    /// θ^δ u(θ r).
    Rescale(RescaleArgs),
    /// Change of variables for a profile read from CSV, or its inverse.
    Transform(TransformArgs),
    /// Orbit of the autonomous system in log variables.
    #[command(name = "phase-orbit")]
    PhaseOrbit(OrbitArgs),
    /// Fixed points of the autonomous system.
    #[command(name = "phase-fixed")]
    PhaseFixed(ParamArgs),
    /// Jacobian and eigenvalues at a fixed point.
    Linearize(LinearizeArgs),
    /// Singularity type of a profile at the origin.
    Classify(ClassifyArgs),
    /// Dirac mass carried by the flux at the origin.
    Dirac(DiracArgs),
    /// Pohozaev identity on balls.
    Pohozaev(IdentityArgs),
    /// Energy identity on balls.
    Energy(IdentityArgs),
    /// Regular shoots over a parameter grid, with first zeros.
    #[command(name = "sweep-nonexistence")]
    SweepNonexistence(SweepArgs),
    /// Dirichlet problem on an annulus.
    Bvp(BvpArgs),
    /// Monotone iteration on an annulus.
    Iterate(IterateArgs),
    /// Crate and schema version.
    Version,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Exponents(_) => "exponents",
            Command::Regime(_) => "regime",
            Command::Mu(_) => "mu",
            Command::Shoot(_) => "shoot",
            Command::Exterior(_) => "exterior",
            Command::Singular(_) => "singular",
            Command::Rescale(_) => "rescale",
            Command::Transform(_) => "transform",
            Command::PhaseOrbit(_) => "phase-orbit",
            Command::PhaseFixed(_) => "phase-fixed",
            Command::Linearize(_) => "linearize",
            Command::Classify(_) => "classify",
            Command::Dirac(_) => "dirac",
            Command::Pohozaev(_) => "pohozaev",
            Command::Energy(_) => "energy",
            Command::SweepNonexistence(_) => "sweep-nonexistence",
            Command::Bvp(_) => "bvp",
            Command::Iterate(_) => "iterate",
            Command::Version => "version",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ToleranceOverrides {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub samples: Option<usize>,
}

impl ToleranceOverrides {
    pub fn build(&self) -> Result<ToleranceConfig> {
        let mut tol = ToleranceConfig::default();
        if let Some(v) = self.rtol {
            tol.rtol = v;
        }
        if let Some(v) = self.atol {
            tol.atol = v;
        }
        if let Some(v) = self.samples {
            tol.samples = v;
        }
        tol.validate()?;
        Ok(tol)
    }
}

/// Everything that determines the output of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: String,
    pub command: Command,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fail_on_red: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_reader(BufReader::new(File::open(path)?))
            .map_err(|e| HenonError::InvalidArgument(format!("bad config {}: {e}", path.display())))?;
        if cfg.schema != SCHEMA {
            return Err(HenonError::InvalidArgument(format!(
                "unsupported config schema `{}`",
                cfg.schema
            )));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(name = "henon-radial", version, about = "Radial solutions of -Δ_p u = |x|^α u^q")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Run from a JSON config written by `--emit-config`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Also write the run's config to this path.
    #[arg(long = "emit-config", global = true)]
    emit_config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps; falls back to HENON_RADIAL_JOBS.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long = "fail-on-red", global = true)]
    fail_on_red: bool,
    #[arg(long, global = true)]
    rtol: Option<f64>,
    #[arg(long, global = true)]
    atol: Option<f64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
}

impl Cli {
    fn into_config(self) -> Result<(RunConfig, Option<PathBuf>, Option<usize>)> {
        let jobs = self.jobs;
        if let Some(path) = &self.config {
            let overridden = self.command.is_some()
                || self.format.is_some()
                || self.output.is_some()
                || self.seed.is_some()
                || self.fail_on_red
                || self.rtol.is_some()
                || self.atol.is_some()
                || self.samples.is_some();
            if overridden {
                return Err(HenonError::InvalidArgument(
                    "--config carries the whole run; only --jobs and --emit-config may accompany it".into(),
                ));
            }
            return Ok((RunConfig::load(path)?, self.emit_config, jobs));
        }
        let command = self
            .command
            .ok_or_else(|| HenonError::InvalidArgument("a subcommand or --config is required".into()))?;
        let cfg = RunConfig {
            schema: SCHEMA.to_string(),
            command,
            tolerances: ToleranceOverrides {
                rtol: self.rtol,
                atol: self.atol,
                samples: self.samples,
            },
            format: self.format.unwrap_or_default(),
            output: self.output,
            seed: self.seed.unwrap_or(0),
            fail_on_red: self.fail_on_red,
        };
        Ok((cfg, self.emit_config, jobs))
    }
}

/// Rendered output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub bytes: Vec<u8>,
    pub red: bool,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    command: &'a str,
    result: &'a T,
}

type CsvWriter<'a> = &'a dyn Fn(&mut Vec<u8>) -> Result<()>;

fn render<T: Serialize>(cfg: &RunConfig, value: &T, csv: Option<CsvWriter>) -> Result<Vec<u8>> {
    match cfg.format {
        Format::Json => {
            let mut text = json_string(&Envelope {
                schema: SCHEMA,
                command: cfg.command.name(),
                result: value,
            })?;
            text.push('\n');
            Ok(text.into_bytes())
        }
        Format::Csv => {
            let csv =
                csv.ok_or_else(|| HenonError::InvalidArgument(format!("`{}` has no CSV form", cfg.command.name())))?;
            let mut buf = Vec::new();
            csv(&mut buf)?;
            Ok(buf)
        }
    }
}

fn read_profile(path: &Path, params: &ProblemParams) -> Result<RadialSolution> {
    radial_from_csv(BufReader::new(File::open(path)?), params)
}

#[derive(Serialize)]
struct ExponentsOut {
    params: ProblemParams,
    regime: crate::params::Regime,
    exponents: crate::params::ExponentSet,
}

#[derive(Serialize)]
struct RegimeOut {
    regime: crate::params::Regime,
    critical: bool,
}

#[derive(Serialize)]
struct MuOut {
    coefficient: Option<f64>,
    solution: RadialSolution,
}

#[derive(Serialize)]
struct SingularOut {
    max_residual: f64,
    solution: RadialSolution,
}

#[derive(Serialize)]
struct TransformOut<T: Serialize> {
    max_residual: Option<f64>,
    profile: T,
}

#[derive(Serialize)]
struct OrbitOut {
    decay_rate: Option<f64>,
    trajectory: crate::phase::PhaseTrajectory,
}

#[derive(Serialize)]
struct FixedOut {
    state: PhaseState,
    field: crate::phase::FieldValue,
}

#[derive(Serialize)]
struct DiracOut {
    mass: Option<f64>,
    coefficient: Option<f64>,
    mu_ratio: Option<f64>,
    mass_from_mu_ratio: Option<f64>,
}

#[derive(Serialize)]
struct IterateOut<'a> {
    deltas: &'a [f64],
    max_monotonicity_violation: f64,
    converged: bool,
    blew_up: bool,
    steps: usize,
    iterates: &'a [RadialSolution],
}

fn identity_source(args: &IdentityArgs, params: &ProblemParams, tol: &ToleranceConfig) -> Result<RadialSolution> {
    match &args.input {
        Some(path) => read_profile(path, params),
        None => Ok(shoot_regular(params, args.u0.unwrap_or(1.0), args.r_max, tol)?.solution),
    }
}

fn identity_radii(args: &IdentityArgs, sol: &RadialSolution) -> Vec<f64> {
    if !args.radius.is_empty() {
        return args.radius.clone();
    }
    let (lo, hi) = (args.inner.unwrap_or(0.0), *sol.r.last().unwrap());
    [0.25, 0.5, 0.75].iter().map(|f| lo + f * (hi - lo)).collect()
}

fn sweep_grid(args: &SweepArgs, seed: u64) -> Result<Vec<ProblemParams>> {
    if args.q_fracs.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
        return Err(HenonError::InvalidArgument("q fractions must lie in (0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = Vec::new();
    for &n in &args.ns {
        for &p in &args.ps {
            if p >= f64::from(n) {
                continue;
            }
            for &alpha in &args.alphas {
                let mut fracs = args.q_fracs.clone();
                fracs.extend((0..args.random).map(|_| rng.gen_range(0.05..0.95)));
                let probe = ProblemParams::new(n, p, p, alpha)?;
                let q_sob = probe.q_sobolev().expect("p < N");
                for f in fracs {
                    let q = (p - 1.0) + f * (q_sob - (p - 1.0));
                    grid.push(ProblemParams::new(n, p, q, alpha)?);
                }
            }
        }
    }
    if grid.is_empty() {
        return Err(HenonError::InvalidArgument("sweep grid is empty".into()));
    }
    Ok(grid)
}

fn sweep_csv(rows: &[SweepRow], buf: &mut Vec<u8>) -> Result<()> {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut w = csv::Writer::from_writer(buf);
    w.write_record([
        "N",
        "p",
        "q",
        "alpha",
        "u0",
        "admissible",
        "terminal",
        "first_zero",
        "scaled_first_zero",
        "scaling_rel_error",
        "red",
    ])?;
    for row in rows {
        w.write_record([
            row.params.n.to_string(),
            fmt_f64(row.params.p),
            fmt_f64(row.params.q),
            fmt_f64(row.params.alpha),
            fmt_f64(row.u0),
            row.admissible.to_string(),
            format!("{:?}", row.terminal),
            opt(row.first_zero),
            opt(row.scaled_first_zero),
            opt(row.scaling_rel_error),
            row.red.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a parsed config. Pure apart from reading `--input` files.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let tol = cfg.tolerances.build()?;
    let mut red = false;
    let bytes = match &cfg.command {
        Command::Exponents(a) => {
            let params = a.build()?;
            let out = ExponentsOut {
                params,
                regime: classify_regime(&params, DEFAULT_CRITICAL_TOL)?,
                exponents: compute_exponents(&params)?,
            };
            render(cfg, &out, None)?
        }
        Command::Regime(a) => {
            let params = a.params.build()?;
            let out = RegimeOut {
                regime: classify_regime(&params, a.critical_tol)?,
                critical: params.is_critical(a.critical_tol),
            };
            render(cfg, &out, None)?
        }
        Command::Mu(a) => {
            let params = a.params.build()?;
            let r = a.grid.build()?;
            let n = params.dim();
            let mut u = Vec::with_capacity(r.len());
            let mut flux = Vec::with_capacity(r.len());
            for &x in &r {
                let (m, dm) = fundamental_solution(&params, x)?;
                u.push(m);
                flux.push(x.powf(n - 1.0) * phi(dm, params.p));
            }
            let solution = RadialSolution::new(params, r, u, flux, SolveMeta::analytic("fundamental"))?;
            let out = MuOut {
                coefficient: mu_coefficient(&params),
                solution,
            };
            render(cfg, &out, Some(&|buf: &mut Vec<u8>| radial_to_csv(&out.solution, buf)))?
        }
        Command::Shoot(a) => {
            let params = a.params.build()?;
            let out = shoot_regular(&params, a.u0, a.r_max, &tol)?;
            render(cfg, &out, Some(&|buf: &mut Vec<u8>| radial_to_csv(&out.solution, buf)))?
        }
        Command::Exterior(a) => {
            let params = a.params.build()?;
            let out = integrate_exterior_from(&params, a.r_in, a.u1, a.du1, a.r_max, &tol)?;
            render(cfg, &out, Some(&|buf: &mut Vec<u8>| radial_to_csv(&out.solution, buf)))?
        }
        Command::Singular(a) => {
            let params = a.params.build()?;
            let solution = exact_singular_solution(&params, &a.grid.build()?)?;
            let out = SingularOut {
                max_residual: max_abs(&ode_residual(&solution)?),
                solution,
            };
            render(cfg, &out, Some(&|buf: &mut Vec<u8>| radial_to_csv(&out.solution, buf)))?
        }
        Command::Rescale(a) => {
            let params = a.params.build()?;
            let out = rescale_solution(&read_profile(&a.input, &params)?, a.theta)?;
            render(cfg, &out, Some(&|buf: &mut Vec<u8>| radial_to_csv(&out, buf)))?
        }
        Command::Transform(a) => {
            let params = a.params.build()?;
            if a.inverse {
                let profile = profile_from_csv(BufReader::new(File::open(&a.input)?))?;
                let out = inverse(&profile, &params)?;
                render(
                    cfg,
                    &TransformOut {
                        max_residual: None,
                        profile: &out,
                    },
                    Some(&|buf: &mut Vec<u8>| radial_to_csv(&out, buf)),
                )?
            } else {
                let sol = read_profile(&a.input, &params)?;
                let profile = transform(&sol, a.kind.into())?;
                let max_residual = Some(max_abs(&residual(&profile, &params)?));
                let csv = |buf: &mut Vec<u8>| profile_to_csv(&profile, buf);
                render(
                    cfg,
                    &TransformOut {
                        max_residual,
                        profile: &profile,
                    },
                    Some(&csv),
                )?
            }
        }
        Command::PhaseOrbit(a) => {
            let params = a.params.build()?;
            let start = match (a.outgoing, a.w0, a.dw0) {
                (Some(eps), _, _) => outgoing_start(&params, eps),
                (None, Some(w), Some(dw)) => PhaseState::new(w, dw),
                _ => return Err(HenonError::InvalidArgument("give --w0 and --dw0, or --outgoing".into())),
            };
            let trajectory = integrate_orbit(&params, start, a.s_max, &tol)?;
            let out = OrbitOut {
                decay_rate: decay_rate(&trajectory),
                trajectory,
            };
            debug_assert_eq!(out.trajectory.fate, classify_orbit(&out.trajectory));
            let csv = |buf: &mut Vec<u8>| trajectory_to_csv(&out.trajectory, buf);
            render(cfg, &out, Some(&csv))?
        }
        Command::PhaseFixed(a) => {
            let params = a.build()?;
            let out = fixed_points(&params)
                .into_iter()
                .map(|state| {
                    Ok(FixedOut {
                        state,
                        field: vector_field(&params, state)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            render(cfg, &out, None)?
        }
        Command::Linearize(a) => {
            let params = a.params.build()?;
            let w = match a.w {
                Some(w) => w,
                None => params
                    .lambda()
                    .ok_or_else(|| HenonError::InvalidParams("λ is undefined for these parameters".into()))?,
            };
            let out = linearize(
                &params,
                PhaseState::new(w, a.dw),
                a.h.unwrap_or_else(|| default_h(&params)),
            )?;
            render(cfg, &out, None)?
        }
        Command::Classify(a) => {
            let params = a.params.build()?;
            let sol = read_profile(&a.input, &params)?;
            let ccfg = ClassifyConfig {
                decades: a.decades,
                ..ClassifyConfig::default()
            };
            render(cfg, &classify_with(&sol, &params, &ccfg)?, None)?
        }
        Command::Dirac(a) => {
            let params = a.params.build()?;
            if a.input.is_none() && a.c.is_none() {
                return Err(HenonError::InvalidArgument("give --input, --c, or both".into()));
            }
            let mass = match &a.input {
                Some(path) => Some(estimate_dirac_mass(&read_profile(path, &params)?, &params)?),
                None => None,
            };
            let out = DiracOut {
                mass,
                coefficient: a.c.map(|c| dirac_coefficient(&params, c)).transpose()?,
                mu_ratio: a.c,
                mass_from_mu_ratio: a.c.map(|c| dirac_from_mu_ratio(&params, c)).transpose()?,
            };
            render(cfg, &out, None)?
        }
        Command::Pohozaev(a) => {
            let params = a.params.build()?;
            let sol = identity_source(a, &params, &tol)?;
            let out = identity_radii(a, &sol)
                .into_iter()
                .map(|r| match a.inner {
                    Some(lo) => pohozaev_annulus(&sol, &params, lo, r),
                    None => pohozaev_terms(&sol, &params, r),
                })
                .collect::<Result<Vec<_>>>()?;
            red = out.iter().any(|rep| !(rep.relative_residual <= IDENTITY_RED_TOL));
            render(cfg, &out, None)?
        }
        Command::Energy(a) => {
            let params = a.params.build()?;
            let sol = identity_source(a, &params, &tol)?;
            let out = identity_radii(a, &sol)
                .into_iter()
                .map(|r| match a.inner {
                    Some(lo) => energy_annulus(&sol, &params, lo, r),
                    None => energy_identity(&sol, &params, r),
                })
                .collect::<Result<Vec<_>>>()?;
            red = out.iter().any(|rep| !(rep.relative_residual <= IDENTITY_RED_TOL));
            render(cfg, &out, None)?
        }
        Command::SweepNonexistence(a) => {
            let grid = sweep_grid(a, cfg.seed)?;
            let rows = nonexistence_sweep(&grid, a.u0, a.r_max, &tol)?;
            red = rows.iter().any(|row| row.red);
            let csv = |buf: &mut Vec<u8>| sweep_csv(&rows, buf);
            render(cfg, &rows, Some(&csv))?
        }
        Command::Bvp(a) => {
            let params = a.params.build()?;
            let (gc, gp) = (a.g_const, a.g_power);
            let bvp = AnnulusBVP::with_nodes(params, a.a, a.b, a.ua, a.ub, |r| gc * r.powf(gp), a.nodes)?;
            let out = solve_annulus(&bvp, a.tol)?;
            render(cfg, &out, Some(&|buf: &mut Vec<u8>| radial_to_csv(&out.solution, buf)))?
        }
        Command::Iterate(a) => {
            let params = a.params.build()?;
            let trace = monotone_iteration(&params, a.m, a.a, a.b, a.k_max, a.tol, a.nodes)?;
            red = trace.max_monotonicity_violation > MONOTONE_RED_TOL;
            let last = trace.iterates.len().saturating_sub(1);
            let out = IterateOut {
                deltas: &trace.deltas,
                max_monotonicity_violation: trace.max_monotonicity_violation,
                converged: trace.converged,
                blew_up: trace.blew_up,
                steps: trace.deltas.len(),
                iterates: if a.all_iterates {
                    &trace.iterates
                } else {
                    &trace.iterates[last..]
                },
            };
            let final_iterate = trace
                .iterates
                .last()
                .ok_or_else(|| HenonError::Numerical("iteration produced no iterate".into()))?;
            render(cfg, &out, Some(&|buf: &mut Vec<u8>| radial_to_csv(final_iterate, buf)))?
        }
        Command::Version => {
            #[derive(Serialize)]
            struct VersionOut {
                version: &'static str,
                schema: &'static str,
            }
            render(
                cfg,
                &VersionOut {
                    version: env!("CARGO_PKG_VERSION"),
                    schema: SCHEMA,
                },
                None,
            )?
        }
    };
    Ok(Outcome { bytes, red })
}

pub fn exit_code(err: &HenonError) -> i32 {
    if err.is_validation() {
        1
    } else {
        2
    }
}

fn resolve_jobs(flag: Option<usize>) -> Result<Option<usize>> {
    let jobs = match flag {
        Some(j) => Some(j),
        None => match std::env::var(JOBS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|e| HenonError::InvalidArgument(format!("{JOBS_ENV}={v}: {e}")))?,
            ),
            Err(_) => None,
        },
    };
    if jobs == Some(0) {
        return Err(HenonError::InvalidArgument("--jobs must be at least 1".into()));
    }
    Ok(jobs)
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<bool> {
    let (cfg, emit, jobs) = cli.into_config()?;
    let jobs = resolve_jobs(jobs)?;
    if let Some(path) = emit {
        let mut text = json_string(&cfg)?;
        text.push('\n');
        std::fs::write(path, text)?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| HenonError::Numerical(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| execute(&cfg))?;
    match &cfg.output {
        Some(path) => std::fs::write(path, &outcome.bytes)?,
        None => out.write_all(&outcome.bytes)?,
    }
    Ok(outcome.red && cfg.fail_on_red)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    match run(cli, out) {
        Ok(true) => {
            let _ = writeln!(err, "red finding");
            3
        }
        Ok(false) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("henon-radial").chain(args.iter().copied());
        let code = dispatch(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn result(stdout: &str) -> serde_json::Value {
        let v: serde_json::Value = serde_json::from_str(stdout).unwrap();
        assert_eq!(v["schema"], "1");
        v["result"].clone()
    }

    #[test]
    fn exponents_lambda() {
        let (code, out, _) = call(&["exponents", "--N", "3", "--p", "2", "--q", "4", "--alpha", "0"]);
        assert_eq!(code, 0);
        let lambda = result(&out)["exponents"]["lambda"].as_f64().unwrap();
        assert!((lambda - 0.605707).abs() < 1e-6);
    }

    #[test]
    fn shoot_zero_data() {
        let (code, out, _) = call(&["shoot", "--N", "3", "--p", "2", "--q", "3", "--alpha", "0", "--u0", "0"]);
        assert_eq!(code, 0);
        let r = result(&out);
        assert_eq!(r["terminal"], "ReachedRMax");
        assert!(r["solution"]["u"]
            .as_array()
            .unwrap()
            .iter()
            .all(|x| x.as_f64() == Some(0.0)));
    }

    #[test]
    fn usage_and_validation_codes() {
        let (code, _, err) = call(&["frobnicate"]);
        assert_eq!(code, 1);
        assert!(err.contains("Usage"));
        assert_eq!(
            call(&["exponents", "--N", "3", "--p", "2", "--q", "4", "--bogus", "1"]).0,
            1
        );
        assert_eq!(call(&["exponents", "--N", "3", "--p", "0.5", "--q", "4"]).0, 1);
        assert_eq!(
            call(&["regime", "--N", "3", "--p", "2", "--q", "4", "--format", "csv"]).0,
            1
        );
        assert_eq!(call(&[]).0, 1);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn negative_alpha_parses() {
        let (code, out, _) = call(&["regime", "--N", "3", "--p", "2", "--q", "4", "--alpha", "-1"]);
        assert_eq!(code, 0);
        assert!(result(&out)["regime"].is_string());
    }

    #[test]
    fn sweep_grid_skips_p_at_least_n_and_is_seeded() {
        let args = SweepArgs {
            ns: vec![2, 3],
            ps: vec![2.0],
            alphas: vec![0.0],
            q_fracs: vec![0.5],
            random: 2,
            u0: 1.0,
            r_max: 1e4,
        };
        let a = sweep_grid(&args, 7).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a, sweep_grid(&args, 7).unwrap());
        assert_ne!(a, sweep_grid(&args, 8).unwrap());
    }
}
