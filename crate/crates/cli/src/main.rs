//! Command line driver: runs single experiments, method comparisons and
//! smoothing-mesh sweeps, and dumps problem instances for inspection.

mod config;
mod exec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

const RUN_HELP: &str = "\
The output directory receives:
  history.csv   per-iteration log: iter, g_value, residual, rel_error, step
  solution.csv  final iterate (1-D problems); solution.pgm for image problems
  config.json   the run configuration exactly as resolved (round-trips)
  report.json   {config, rows, cols, delta, stopping, iterations, final_g,
                 final_residual, final_rel_error, sparsity}

Floats in CSV artifacts carry 17 significant digits, so identical
configurations reproduce byte-identical files.

Exit codes: 0 the residual stop was reached, 2 the iteration budget ran out
or the line search stalled, 1 error.";

#[derive(Parser)]
#[command(
    name = "smoothreg",
    version,
    about = "Iterative solvers for linear ill-posed problems with smoothed descent directions",
    after_help = "Set SMOOTHREG_THREADS to cap the worker threads used by compare and sweep-dx."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one problem with one method and write run artifacts.
    #[command(after_help = RUN_HELP)]
    Run(RunArgs),
    /// Run a problems x methods grid over several seeds into table.csv.
    Compare(CompareArgs),
    /// Rerun one configuration across smoothing-mesh multipliers.
    SweepDx(SweepArgs),
    /// Write a problem instance (truth, data, operator, metadata) to disk.
    DumpProblem(DumpArgs),
}

#[derive(Args, Clone)]
struct SolveArgs {
    /// Relative noise level added to the exact data.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Stop once the residual falls to TAU * delta (TAU >= 1).
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Iteration budget.
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    /// Objective mode: full | data-only | smooth-only (ours methods).
    #[arg(long, default_value = "full")]
    mode: String,
    /// Project every iterate onto the nonnegative orthant (ours methods).
    #[arg(long)]
    nonneg: bool,
    /// Ignore the residual stop and always run to the iteration budget.
    #[arg(long)]
    no_stop: bool,
    /// Scale the smoothing quadrature mesh by this factor (ours methods).
    #[arg(long, default_value_t = 1.0)]
    dx_mult: f64,
    /// Output directory for artifacts.
    #[arg(long, default_value = "smoothreg-out")]
    out: PathBuf,
}

impl SolveArgs {
    fn into_config(
        self,
        problem: String,
        method: String,
        seed: u64,
        image: Option<PathBuf>,
    ) -> RunConfig {
        RunConfig {
            problem,
            method,
            noise: self.noise,
            seed,
            tau: self.tau,
            max_iter: self.max_iter,
            dx_mult: self.dx_mult,
            mode: self.mode,
            nonneg: self.nonneg,
            no_stop: self.no_stop,
            image,
            out: self.out,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Problem spec: numdiff:g1[:N] | numdiff:g2[:N] | deblur[:SIDE[:SIGMA]]
    /// | tomo[:SIDE[:ANGLES[:DETECTORS]]].
    #[arg(long)]
    problem: String,
    /// Method spec: ours:l2 | ours:h1[:BC] | ours:conj-l2-l2 |
    /// ours:conj-l2-h1[:BC] | baseline:landweber | baseline:cgls |
    /// baseline:tikhonov. BC: neumann (default) | dirichlet | mixed-left |
    /// mixed-right.
    #[arg(long)]
    method: String,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read the deblur scene from a PGM file instead of the builtin one.
    #[arg(long)]
    image: Option<PathBuf>,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated problem specs.
    #[arg(long, value_delimiter = ',', required = true)]
    problems: Vec<String>,
    /// Comma-separated method specs.
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<String>,
    /// Comma-separated noise seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    /// Read the deblur scene from a PGM file instead of the builtin one.
    #[arg(long)]
    image: Option<PathBuf>,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Problem spec (same grammar as `run`).
    #[arg(long)]
    problem: String,
    /// Method spec; must be one of the ours:* methods.
    #[arg(long, default_value = "ours:conj-l2-l2")]
    method: String,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated positive mesh multipliers, e.g. 1,3,5.
    #[arg(long, value_delimiter = ',', required = true)]
    multipliers: Vec<f64>,
    /// Read the deblur scene from a PGM file instead of the builtin one.
    #[arg(long)]
    image: Option<PathBuf>,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct DumpArgs {
    /// Problem spec (same grammar as `run`).
    #[arg(long)]
    problem: String,
    /// Relative noise level added to the exact data.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read the deblur scene from a PGM file instead of the builtin one.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "smoothreg-out")]
    out: PathBuf,
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SMOOTHREG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| format!("SMOOTHREG_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err("SMOOTHREG_THREADS must be a positive integer".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Run(args) => {
            let cfg = args.solve.into_config(args.problem, args.method, args.seed, args.image);
            exec::cmd_run(&cfg)
        }
        Cmd::Compare(args) => {
            let cfg = args.solve.into_config(String::new(), String::new(), 0, args.image);
            exec::cmd_compare(&cfg, &args.problems, &args.methods, &args.seeds)
        }
        Cmd::SweepDx(args) => {
            let cfg = args.solve.into_config(args.problem, args.method, args.seed, args.image);
            exec::cmd_sweep_dx(&cfg, &args.multipliers)
        }
        Cmd::DumpProblem(args) => {
            exec::cmd_dump_problem(&args.problem, args.noise, args.seed, &args.image, &args.out)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
