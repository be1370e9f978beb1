use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod cache;
mod commands;
mod error;
mod expr;
mod output;

use error::CliError;

/// Mass, staircase, dimension and F^alpha-calculus on fractal curves.
///
/// CURVE is a built-in name (koch, minkowski, line, weierstrass) or the
/// path of a JSON curve spec.
#[derive(Debug, Parser)]
#[command(name = "fractal-calc", author, version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimized chord sum over a parameter interval.
    Mass(MassArgs),
    /// Staircase table S(t) on a uniform grid.
    Staircase(StaircaseArgs),
    /// Gamma-dimension by two-scale ratio bisection.
    Dimension(DimensionArgs),
    /// F^alpha-integral of an expression.
    Integrate(IntegrateArgs),
    /// F^alpha-derivative of an expression at one parameter.
    Differentiate(DifferentiateArgs),
    /// Taylor partial sum in powers of the rise.
    Taylor(TaylorArgs),
    /// Density profile of the absorption model.
    Absorb(AbsorbArgs),
    /// Mass ratio under a similarity transform.
    Invariance(InvarianceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Built-in curve name or JSON spec path.
    pub curve: String,
    /// Exponent; arithmetic allowed, e.g. `ln4/ln3`. Defaults to the
    /// curve's similarity dimension.
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file; stdout when absent. CSV files get a `.meta.json` sidecar.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Settings for the staircase table behind the calculus commands.
#[derive(Debug, Args)]
pub struct TableArgs {
    /// Number of staircase segments.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Mesh bound per segment; defaults to a tenth of the segment width.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Normalized iteration budget per run.
    #[arg(long, default_value_t = 2000.0)]
    pub iters: f64,
}

#[derive(Debug, Args)]
pub struct MassArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Interval start; defaults to the domain start.
    #[arg(long)]
    pub a: Option<f64>,
    /// Interval end; defaults to the domain end.
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000.0)]
    pub iters: f64,
    /// Write the best run's trace as CSV (N_prime,sigma).
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Write the final subdivision as CSV.
    #[arg(long)]
    pub subdivision_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct StaircaseArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DimensionArgs {
    /// Built-in curve name or JSON spec path.
    pub curve: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bracket width at which bisection stops.
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.0125)]
    pub delta1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta2: f64,
    /// Optimizer runs averaged per scale.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000.0)]
    pub iters: f64,
    #[arg(long, default_value_t = 12)]
    pub max_iterations: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    /// Integrand over t, S, x, y.
    #[arg(long)]
    pub expr: String,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Largest accepted gap between upper and lower sums.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DifferentiateArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    #[arg(long)]
    pub expr: String,
    #[arg(long)]
    pub t: f64,
    /// Step in the rise variable; defaults to 1e-4 of the total mass.
    #[arg(long)]
    pub h: Option<f64>,
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TaylorArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    #[arg(long)]
    pub expr: String,
    /// Expansion point; defaults to the domain start.
    #[arg(long)]
    pub center: Option<f64>,
    /// Evaluation point.
    #[arg(long)]
    pub at: f64,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AbsorbArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho0: f64,
    /// Number of profile points, spread uniformly over the domain.
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    /// Relative bound for the ODE residual check.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct InvarianceArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    /// `translate:DX,DY`, `scale:L` or `rotate:RADIANS`.
    #[arg(long)]
    pub transform: String,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000.0)]
    pub iters: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Mass(a) => commands::mass(a),
        Command::Staircase(a) => commands::staircase(a),
        Command::Dimension(a) => commands::dimension(a),
        Command::Integrate(a) => commands::integrate(a),
        Command::Differentiate(a) => commands::differentiate(a),
        Command::Taylor(a) => commands::taylor(a),
        Command::Absorb(a) => commands::absorb(a),
        Command::Invariance(a) => commands::invariance(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let err = CliError::usage(first.trim_start_matches("error: "));
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
