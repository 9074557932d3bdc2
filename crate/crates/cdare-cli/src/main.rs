use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use cdare_core::generator::ProblemRegime;
use cdare_core::Complex64;
use clap::{Args, Parser, Subcommand};

use cdare_cli::run::{
    self, BenchOptions, Family, GenerateOptions, InitialIterate, Method, SolveOptions,
    TransformOptions,
};

/// Maximal Hermitian solutions of conjugate discrete-time algebraic Riccati
/// equations: plain and accelerated fixed-point solvers, the equivalent
/// standard-DARE transform, and seeded benchmark generators.
///
/// Set CDARE_LOG=error|info|debug to control diagnostics on stderr.
#[derive(Parser)]
#[command(name = "cdare", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write solution, per-iteration CSV and manifest.
    Solve(SolveArgs),
    /// Transform a problem into its equivalent standard DARE file.
    Transform(TransformArgs),
    /// Generate a benchmark problem (plus reference solution for the
    /// analytic families).
    Generate(GenerateArgs),
    /// Run a method grid over a suite of problems and emit one long CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file (schema cdare-1).
    problem: PathBuf,
    /// Iteration: fpi, fpi-hat, or afpi.
    #[arg(long, default_value = "fpi")]
    method: String,
    /// Acceleration order for afpi (>= 2).
    #[arg(long, default_value_t = 2)]
    r: usize,
    /// Normalized-residual stopping tolerance.
    #[arg(long, default_value_t = 1e-15)]
    tol: f64,
    /// Maximum number of (outer) iterations.
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    /// Initial iterate: "auto" (constructed dominating start) or a
    /// solution-1 file path.
    #[arg(long, default_value = "auto")]
    x0: String,
    /// Output directory for solution.json, iterations.csv, manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TransformArgs {
    /// Problem file (schema cdare-1).
    problem: PathBuf,
    /// Output path for the dare-1 file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Family: example1 (embedded scalar), example2 (critical case), random.
    #[arg(long)]
    family: String,
    /// Problem order.
    #[arg(long)]
    n: usize,
    /// Input dimension (random family only; the embedded families have m=1).
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scalar parameter a, as "re" or "re,im".
    #[arg(long, default_value = "0.6", allow_hyphen_values = true)]
    a: String,
    /// Scalar parameter b, as "re" or "re,im".
    #[arg(long, default_value = "1.0", allow_hyphen_values = true)]
    b: String,
    /// Control weight r0 > 0.
    #[arg(long, default_value_t = 1.0)]
    r0: f64,
    /// Constant-term corner value (example1 only).
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    h: f64,
    /// Spectrum regime for the random family: pd or indefinite.
    #[arg(long, default_value = "pd")]
    regime: String,
    /// Output path for the problem file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite file (schema suite-1) listing problem files.
    #[arg(long)]
    suite: PathBuf,
    /// Comma-separated methods to run.
    #[arg(long, default_value = "fpi,afpi")]
    methods: String,
    /// Comma-separated acceleration orders applied to afpi runs.
    #[arg(long, default_value = "2")]
    rs: String,
    #[arg(long, default_value_t = 1e-15)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for results.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [re] => Ok(Complex64::new(re.trim().parse()?, 0.0)),
        [re, im] => Ok(Complex64::new(re.trim().parse()?, im.trim().parse()?)),
        _ => bail!("expected 're' or 're,im', got '{s}'"),
    }
}

fn parse_regime(s: &str) -> Result<ProblemRegime> {
    match s {
        "pd" => Ok(ProblemRegime::Pd),
        "indefinite" => Ok(ProblemRegime::Indefinite),
        other => bail!("unknown regime '{other}' (expected pd or indefinite)"),
    }
}

fn command_echo() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve(args) => {
            let x0 = if args.x0 == "auto" {
                InitialIterate::Auto
            } else {
                InitialIterate::Path(PathBuf::from(&args.x0))
            };
            run::cmd_solve(&SolveOptions {
                problem_path: args.problem,
                method: Method::parse(&args.method)?,
                r: args.r,
                tol: args.tol,
                max_iters: args.max_iters,
                x0,
                out_dir: args.out,
                command_echo: command_echo(),
            })
        }
        Command::Transform(args) => run::cmd_transform(&TransformOptions {
            problem_path: args.problem,
            out_path: args.out,
        }),
        Command::Generate(args) => run::cmd_generate(&GenerateOptions {
            family: Family::parse(&args.family)?,
            n: args.n,
            m: args.m,
            seed: args.seed,
            a: parse_complex(&args.a)?,
            b: parse_complex(&args.b)?,
            r0: args.r0,
            h: args.h,
            regime: parse_regime(&args.regime)?,
            out_path: args.out,
        }),
        Command::Bench(args) => {
            let methods = args
                .methods
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| Method::parse(s.trim()))
                .collect::<Result<Vec<_>>>()?;
            if methods.is_empty() {
                bail!("no methods given");
            }
            let rs = args
                .rs
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| Ok(s.trim().parse::<usize>()?))
                .collect::<Result<Vec<_>>>()?;
            run::cmd_bench(&BenchOptions {
                suite_path: args.suite,
                methods,
                rs,
                tol: args.tol,
                max_iters: args.max_iters,
                jobs: args.jobs,
                out_dir: args.out,
                command_echo: command_echo(),
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CDARE_LOG", "error"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(run::EXIT_INPUT_ERROR as u8)
        }
    }
}
