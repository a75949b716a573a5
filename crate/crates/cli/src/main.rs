use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use infsup_lab_core::infsup::ElementPair;
use infsup_lab_core::locking::LockingMethod;
use infsup_lab_core::stokes::{StokesMethod, DEFAULT_EPS};
use infsup_lab_core::weakbc::WeakBcMethod;

mod commands;
mod output;

/// Mixed finite element experiments on the unit square: Stokes pairs and
/// stabilizations, discrete inf-sup constants, penalty locking and weakly
/// imposed boundary conditions.
///
/// Worker threads for independent levels come from INFSUP_LAB_THREADS
/// (default 1).
#[derive(Debug, Parser)]
#[command(name = "infsup-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the manufactured Stokes problem on one mesh and report errors.
    Stokes(StokesArgs),
    /// Run a convergence study over several meshes and fit rates.
    Convergence(ConvergenceArgs),
    /// Compute the discrete inf-sup constant of a velocity/pressure pair.
    Infsup(InfsupArgs),
    /// Sweep the penalty parameter of the penalized Poisson-type problem.
    Locking(LockingArgs),
    /// Solve -Δu + u = f with weakly imposed Dirichlet data.
    Weakbc(WeakbcArgs),
    /// Run the acceptance checks and print a pass/fail table.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args, Clone)]
struct Outputs {
    /// Write a JSON record {config, results, status, version}.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Write a CSV table with a header row.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StokesArgs {
    /// Discretization.
    #[arg(long, default_value = "th", value_parser = PossibleValuesParser::new(StokesMethod::NAMES))]
    method: String,
    /// Cells per side of the unit square.
    #[arg(long, default_value_t = 8, value_parser = parse_n)]
    n: usize,
    /// Stabilization weight for bp, gls and dw.
    #[arg(long, default_value_t = DEFAULT_EPS, value_parser = parse_positive)]
    eps: f64,
    /// Write the mesh and fields as legacy ASCII VTK.
    #[arg(long, value_name = "PATH")]
    vtk: Option<PathBuf>,
    #[command(flatten)]
    out: Outputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Stokes,
    Weakbc,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    /// Problem family.
    #[arg(long, value_enum, default_value_t = Family::Stokes)]
    family: Family,
    /// Method name: a Stokes method (p1p1-plain, p1p1-loss, bp, gls, dw, th,
    /// mini, p2p0) or a weak boundary method (multiplier, bh, nitsche).
    #[arg(long, default_value = "th")]
    method: String,
    /// Mesh sizes, at least three.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32", value_parser = parse_n)]
    levels: Vec<usize>,
    /// Stabilization weight for bp, gls and dw.
    #[arg(long, default_value_t = DEFAULT_EPS, value_parser = parse_positive)]
    eps: f64,
    #[command(flatten)]
    weak: WeakOptions,
    #[command(flatten)]
    out: Outputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Euclidean,
    Weighted,
}

#[derive(Debug, Args)]
struct InfsupArgs {
    /// Velocity/pressure pair.
    #[arg(long, default_value = "th", value_parser = PossibleValuesParser::new(ElementPair::NAMES))]
    pair: String,
    #[arg(long, default_value_t = 8, value_parser = parse_n)]
    n: usize,
    /// Norms: Euclidean coefficients or H1 velocity / L2 pressure.
    #[arg(long, value_enum, default_value_t = Mode::Weighted)]
    mode: Mode,
    /// Write the worst pressure mode as legacy ASCII VTK.
    #[arg(long, value_name = "PATH")]
    vtk: Option<PathBuf>,
    /// JSON record; --csv writes the spectrum (index, sigma).
    #[command(flatten)]
    out: Outputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Projection {
    Consistent,
    Lumped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GammaSpace {
    Broken,
    Continuous,
}

#[derive(Debug, Args)]
struct LockingArgs {
    #[arg(long, default_value = "plain", value_parser = PossibleValuesParser::new(LockingMethod::NAMES))]
    method: String,
    /// Penalty values, one report row each.
    #[arg(long, value_delimiter = ',', default_value = "1e2,1e4,1e6", value_parser = parse_lambda)]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 8, value_parser = parse_n)]
    n: usize,
    /// Poincaré constant of the domain used by the corrected method
    /// [default: 1/(π√2)].
    #[arg(long, value_parser = parse_positive)]
    c_omega: Option<f64>,
    /// Projection of ∇p in the corrected method.
    #[arg(long, value_enum, default_value_t = Projection::Consistent)]
    projection: Projection,
    /// Multiplier space of the multiplier method.
    #[arg(long, value_enum, default_value_t = GammaSpace::Broken)]
    multiplier_space: GammaSpace,
    /// Add (u − ∇p, v − ∇q) to the multiplier method.
    #[arg(long)]
    augmented: bool,
    /// Body force f = (fx, fy), constant, given as `fx,fy`.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0], allow_negative_numbers = true)]
    f: Vec<f64>,
    /// Constant g.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    g: f64,
    /// JSON record and CSV table (lambda, u_h1, p_h1, status).
    #[command(flatten)]
    out: Outputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Trace {
    P1,
    P0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Penalty {
    Full,
    Projected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Rule {
    Squared,
    Linear,
}

#[derive(Debug, Args, Clone)]
struct WeakOptions {
    /// Nitsche penalty γ [default: 4·C_i² with C_i the inverse-inequality
    /// constant of the mesh].
    #[arg(long, value_parser = parse_positive)]
    gamma: Option<f64>,
    /// Multiplier stabilization α [default: 0.5/C_i²].
    #[arg(long, value_parser = parse_positive)]
    alpha: Option<f64>,
    /// Default parameters from C_i² (squared) or C_i (linear).
    #[arg(long, value_enum, default_value_t = Rule::Squared)]
    rule: Rule,
    /// Multiplier space: continuous P1 or piecewise constant traces.
    #[arg(long, value_enum, default_value_t = Trace::P1)]
    trace: Trace,
    /// Nitsche penalty: full edge mass or its projection on constants.
    #[arg(long, value_enum, default_value_t = Penalty::Full)]
    penalty: Penalty,
}

#[derive(Debug, Args)]
struct WeakbcArgs {
    #[arg(long, default_value = "nitsche", value_parser = PossibleValuesParser::new(WeakBcMethod::NAMES))]
    method: String,
    #[arg(long, default_value_t = 8, value_parser = parse_n)]
    n: usize,
    #[command(flatten)]
    weak: WeakOptions,
    /// Also compare the stabilized multiplier with Nitsche (P0 traces,
    /// γ = 1/α).
    #[arg(long)]
    equivalence: bool,
    /// Write the mesh and fields as legacy ASCII VTK.
    #[arg(long, value_name = "PATH")]
    vtk: Option<PathBuf>,
    #[command(flatten)]
    out: Outputs,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    /// Run only these criteria (1 to 13).
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..=13))]
    only: Vec<u64>,
    /// Seed for the random matrices of the SVD check.
    #[arg(long, default_value_t = infsup_lab_core::criteria::DEFAULT_SEED)]
    seed: u64,
    /// Write a JSON record of the outcomes.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

fn parse_n(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(n) if (1..=256).contains(&n) => Ok(n),
        Ok(n) => Err(format!("mesh size must be in 1..=256, got {n}")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("expected a positive finite number, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_lambda(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("lambda must be non-negative and finite, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

/// Failure classes of a run.
#[derive(Debug)]
enum Failure {
    /// Bad parameters caught after parsing.
    Usage(String),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numerical(e)
    }
}

impl From<infsup_lab_core::Error> for Failure {
    fn from(e: infsup_lab_core::Error) -> Self {
        Failure::Numerical(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = infsup_lab_core::verify::worker_count();
    let result = match cli.command {
        Command::Stokes(a) => commands::stokes(a),
        Command::Convergence(a) => commands::convergence(a, threads),
        Command::Infsup(a) => commands::infsup(a),
        Command::Locking(a) => commands::locking(a, threads),
        Command::Weakbc(a) => commands::weakbc(a),
        Command::Selftest(a) => commands::selftest(a, threads),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
