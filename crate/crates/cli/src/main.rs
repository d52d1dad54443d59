mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Fractal covering counts, boundary scaled functionals and regularity screening.
#[derive(Debug, Parser)]
#[command(name = "parafractal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the level intervals and endpoints of the Cantor set C(alpha).
    GenCantor(GenCantorArgs),
    /// Write the point cloud endpoints(C_level) x {0, 1/n}.
    GenProduct(GenProductArgs),
    /// Cover counts over a range of scales and the fitted log-log slope.
    EstimateDim(EstimateDimArgs),
    /// Scaled functionals A, E, F, G, Y at boundary points.
    Eval(EvalArgs),
    /// Screen boundary points, count the flagged cover and check the margin.
    Screen(ScreenArgs),
    /// Both sides of the local energy inequality for the default cutoff family.
    EnergyResidual(EnergyResidualArgs),
    /// Sample a generator on the unit half-cylinder and store it as a field file.
    GenField(GenFieldArgs),
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct QuadArgs {
    /// Quadrature cells per radius.
    #[arg(long, default_value_t = 12)]
    cells: usize,
    /// Time slices per r^2.
    #[arg(long, default_value_t = 12)]
    time_slices: usize,
}

#[derive(Debug, Args)]
struct GenCantorArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    level: u32,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct GenProductArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    level: u32,
    /// Largest n in the exported tail {1/n}.
    #[arg(long, default_value_t = 1000)]
    cutoff: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeneratorSet {
    Cantor,
    Harmonic,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Euclidean,
    Parabolic,
}

#[derive(Debug, Args)]
struct EstimateDimArgs {
    /// Point cloud CSV with 1, 2 or 4 numeric columns.
    #[arg(long, conflicts_with = "generator", required_unless_present = "generator")]
    input: Option<PathBuf>,
    /// Count a generator-backed set exactly instead of reading a cloud.
    #[arg(long, value_enum)]
    generator: Option<GeneratorSet>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,
    #[arg(long, default_value_t = 1e-4)]
    delta_min: f64,
    #[arg(long, default_value_t = 1e-1)]
    delta_max: f64,
    /// Fit window `LO,HI`; defaults to dropping two scales at each end.
    #[arg(long, value_parser = commands::parse_pair)]
    window: Option<(f64, f64)>,
    /// Also write an SVG of the fit.
    #[arg(long)]
    plot: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct FieldArgs {
    /// Field file path or `gen:NAME[:KEY=VALUE,...]`.
    #[arg(long)]
    field: String,
}

#[derive(Debug, Args)]
struct ConstArgs {
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    script_e: f64,
    #[arg(long, default_value_t = 10.0)]
    k1: f64,
    #[arg(long, default_value_t = 10.0)]
    k2: f64,
    #[arg(long, default_value_t = 10.0)]
    k3: f64,
    #[arg(long, default_value_t = 10.0)]
    c: f64,
    /// Use one space-time mean of the pressure instead of slice-wise means.
    #[arg(long)]
    spacetime_mean: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    field: FieldArgs,
    /// Boundary point `X1,X2,T`; repeatable.
    #[arg(long = "z", value_parser = commands::parse_point, allow_hyphen_values = true, required = true)]
    points: Vec<[f64; 3]>,
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',', required = true)]
    radii: Vec<f64>,
    #[command(flatten)]
    quad: QuadArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct ScreenArgs {
    #[command(flatten)]
    field: FieldArgs,
    /// Boundary grid `HALF_WIDTH,SPACE_POINTS,TIME_POINTS,T_MIN`.
    #[arg(long, value_parser = commands::parse_grid, allow_hyphen_values = true, default_value = "0.5,9,5,-0.25")]
    grid: parafractal::BoundaryGrid,
    /// Comma-separated radii, each below 2^-12 unless --rescale is given.
    #[arg(long, value_delimiter = ',', required = true)]
    radii: Vec<f64>,
    /// Rescale the field so that the largest radius maps to 2^-13.
    #[arg(long)]
    rescale: bool,
    #[arg(long)]
    plot: bool,
    #[command(flatten)]
    consts: ConstArgs,
    #[command(flatten)]
    quad: QuadArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct EnergyResidualArgs {
    #[command(flatten)]
    field: FieldArgs,
    /// Cutoff centre `X1,X2,T0`.
    #[arg(long = "z", value_parser = commands::parse_point, allow_hyphen_values = true, default_value = "0,0,0")]
    center: [f64; 3],
    #[arg(long, default_value_t = 0.9)]
    radius: f64,
    /// Evaluation time in (-1, 0).
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.5)]
    t: f64,
    #[command(flatten)]
    quad: QuadArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct GenFieldArgs {
    /// `gen:NAME[:KEY=VALUE,...]` or a bare generator name.
    #[arg(long)]
    field: String,
    /// Nodes per axis.
    #[arg(long, default_value_t = 17)]
    resolution: usize,
    /// Also write the velocity/pressure slice at this time index as CSV.
    #[arg(long)]
    slice: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("PARAFRACTAL_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("PARAFRACTAL_THREADS must be a positive integer, got `{v}`"))?;
        anyhow::ensure!(n > 0, "PARAFRACTAL_THREADS must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; exit code 2 is reserved for margin violations
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let run = || -> anyhow::Result<commands::Outcome> {
        init_threads()?;
        match cli.command {
            Command::GenCantor(a) => commands::gen_cantor(a),
            Command::GenProduct(a) => commands::gen_product(a),
            Command::EstimateDim(a) => commands::estimate_dim(a),
            Command::Eval(a) => commands::eval(a),
            Command::Screen(a) => commands::screen(a),
            Command::EnergyResidual(a) => commands::energy_residual(a),
            Command::GenField(a) => commands::gen_field(a),
        }
    };
    match run() {
        Ok(commands::Outcome::Ok) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Violation) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
