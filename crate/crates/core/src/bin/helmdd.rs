use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use helmdd::analysis::{emit_sweep, scaling_sweep, sweep_slopes, SweepSpec};
use helmdd::harness::{
    default_ks, emit_results, run_experiment, run_table, write_results, ExperimentConfig, Nesting, OutputFormat,
    Preset, ResultRow, RhsKind, RunSettings,
};
use helmdd::krylov::PrecondSide;
use helmdd::mesh::{MeshRule, Scenario};
use helmdd::precond::{PrecondKind, Projection};

#[derive(Parser)]
#[command(name = "helmdd", version, about = "Domain decomposition preconditioners for 2-D Helmholtz problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment table.
    Run(RunArgs),
    /// Solve a single configuration.
    Solve(SolveArgs),
    /// Field-of-values estimates for absorptive preconditioning.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct Common {
    /// Output file; format follows the extension unless --format is given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 0.5)]
    inner_tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Run configurations above the memory budget or the pollution-free cap.
    #[arg(long)]
    allow_large: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    preset: Preset,
    /// Comma-separated wavenumbers; defaults depend on the preset.
    #[arg(long, value_delimiter = ',')]
    k: Vec<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    k: f64,
    #[arg(long, default_value = "ppw")]
    mesh_rule: MeshRule,
    #[arg(long, default_value = "ImpHRAS")]
    precond: PrecondKind,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    eps_prob: f64,
    #[arg(long, default_value = "constant")]
    scenario: Scenario,
    #[arg(long, default_value_t = 1.0)]
    c_star: f64,
    #[arg(long, default_value = "plane_wave")]
    rhs: RhsKind,
    /// Solve the coarse problem by inner GMRES on cells of size k^-a.
    #[arg(long, conflicts_with = "nested_local")]
    nested_coarse: Option<f64>,
    /// Solve the local problems by inner GMRES on cells of size k^-a.
    #[arg(long)]
    nested_local: Option<f64>,
    #[arg(long, default_value = "right")]
    side: String,
    /// Form the projection with the shifted matrix instead of the system matrix.
    #[arg(long)]
    shifted_projection: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Comma-separated wavenumbers.
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 15.0, 20.0])]
    k: Vec<f64>,
    /// Preconditioner absorption `eps = k^beta`.
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    /// Coarse cell size `H = k^-alpha`.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Fine cells per wavelength unit: the mesh has `m = factor * k` cells per side.
    #[arg(long, default_value_t = 3.0)]
    mesh_factor: f64,
    #[arg(long, default_value = "AS")]
    precond: PrecondKind,
    /// GMRES iterations compared against the field-of-values envelope.
    #[arg(long, default_value_t = 25)]
    gmres_iters: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn parse_side(s: &str) -> Result<PrecondSide, String> {
    match s {
        "left" => Ok(PrecondSide::Left),
        "right" => Ok(PrecondSide::Right),
        "none" => Ok(PrecondSide::None),
        _ => Err(format!("unknown side {s}")),
    }
}

fn init_threads(n: usize) {
    if n > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size thread pool: {e}");
        }
    }
}

fn output(rows: &[ResultRow], common: &Common) -> helmdd::Result<()> {
    match &common.out {
        Some(path) => {
            let format = common.format.unwrap_or_else(|| OutputFormat::from_path(path));
            write_results(path, rows, format)
        }
        None => emit_results(rows, common.format.unwrap_or(OutputFormat::Csv), std::io::stdout().lock()),
    }
}

fn status(rows: &[ResultRow]) -> ExitCode {
    if rows.iter().all(|r| r.converged) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn run(cli: Cli) -> helmdd::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            init_threads(args.common.threads);
            let ks = if args.k.is_empty() { default_ks(args.preset) } else { args.k };
            let settings = RunSettings {
                rel_tol: args.common.tol,
                inner_tol: args.common.inner_tol,
                max_iters: args.common.max_iters,
                allow_large: args.common.allow_large,
                parallel: true,
            };
            let rows = run_table(args.preset, &ks, &settings);
            output(&rows, &args.common)?;
            Ok(status(&rows))
        }
        Command::Solve(args) => {
            init_threads(args.common.threads);
            let mut c = ExperimentConfig::new(args.k, args.mesh_rule, args.precond, args.alpha, args.beta);
            c.eps_prob = args.eps_prob;
            c.scenario = args.scenario;
            c.c_star = args.c_star;
            c.rhs = args.rhs;
            c.nesting = match (args.nested_coarse, args.nested_local) {
                (Some(a), _) => Nesting::Coarse(a),
                (None, Some(a)) => Nesting::Local(a),
                (None, None) => Nesting::None,
            };
            c.side = parse_side(&args.side).map_err(helmdd::Error::InvalidArgument)?;
            if args.shifted_projection {
                c.projection = Projection::Shifted;
            }
            c.rel_tol = args.common.tol;
            c.inner_tol = args.common.inner_tol;
            c.max_iters = args.common.max_iters;
            c.allow_large = args.common.allow_large;
            let rows = vec![run_experiment(&c)?];
            output(&rows, &args.common)?;
            Ok(status(&rows))
        }
        Command::Analyze(args) => {
            init_threads(args.threads);
            let spec = SweepSpec {
                ks: args.k,
                beta: args.beta,
                alpha: args.alpha,
                mesh_factor: args.mesh_factor,
                precond: args.precond,
                gmres_iters: args.gmres_iters,
            };
            let rows = scaling_sweep(&spec)?;
            for tag in ["left_D", "right_Dinv"] {
                let (norm_slope, dist_slope) = sweep_slopes(&rows, tag);
                log::info!("{tag}: slope of log norm vs log(k^2/eps) = {norm_slope:?}, of log dist vs log(eps/k^2) = {dist_slope:?}");
            }
            match &args.out {
                Some(path) => emit_sweep(&rows, std::io::BufWriter::new(std::fs::File::create(path)?))?,
                None => emit_sweep(&rows, std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
