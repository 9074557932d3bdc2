//! Subcommand implementations.
//!
//! Exit codes: 0 converged, 2 stopped without reaching the tolerance
//! (iteration cap or stagnation), 3 the iteration itself broke down
//! (left the operator domain, flow breakdown, recovery failure), 4 anything
//! wrong with inputs, parameters or preconditions. Diagnostics go to
//! standard error; machine-readable results go to the output files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cdare_core::generator::{
    make_example1, make_example2, random_problem, ProblemRegime, ScalarFamilyParams,
};
use cdare_core::solver::{afpi_solve, fpi_hat_solve, fpi_solve, make_initial_default};
use cdare_core::{
    batch, CdareProblem, Complex64, DareProblem, HermitianMatrix, SolveReport, SolveStatus,
    SolverConfig,
};
use log::{debug, info, warn};

use crate::format::{
    self, fmt_float, read_json, write_canonical, DareFile, ProblemFile, RunManifest,
    SolutionFile, SuiteFile,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_DOMAIN_FAILURE: i32 = 3;
pub const EXIT_INPUT_ERROR: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Fpi,
    FpiHat,
    Afpi,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fpi" => Ok(Method::Fpi),
            "fpi-hat" => Ok(Method::FpiHat),
            "afpi" => Ok(Method::Afpi),
            other => bail!("unknown method '{other}' (expected fpi, fpi-hat or afpi)"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Fpi => "fpi",
            Method::FpiHat => "fpi-hat",
            Method::Afpi => "afpi",
        }
    }
}

#[derive(Clone, Debug)]
pub enum InitialIterate {
    Auto,
    Path(PathBuf),
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub problem_path: PathBuf,
    pub method: Method,
    pub r: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub x0: InitialIterate,
    pub out_dir: PathBuf,
    pub command_echo: String,
}

fn load_problem(path: &Path) -> Result<CdareProblem> {
    let file: ProblemFile = read_json(path)?;
    file.to_problem()
        .with_context(|| format!("invalid problem in {}", path.display()))
}

fn initial_iterate(p: &CdareProblem, choice: &InitialIterate) -> Result<HermitianMatrix> {
    match choice {
        InitialIterate::Auto => make_initial_default(p)
            .context("constructing the default initial iterate (zero feedback)"),
        InitialIterate::Path(path) => {
            let file: SolutionFile = read_json(path)?;
            let x0 = file.to_matrix()?;
            if x0.order() != p.state_dim() {
                bail!(
                    "initial iterate order {} does not match problem order {}",
                    x0.order(),
                    p.state_dim()
                );
            }
            Ok(x0)
        }
    }
}

fn exit_code_for(status: &SolveStatus) -> i32 {
    match status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::MaxIters | SolveStatus::Stagnated => EXIT_NOT_CONVERGED,
        _ => EXIT_DOMAIN_FAILURE,
    }
}

fn write_iteration_csv(path: &Path, report: &SolveReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["k", "nres", "rho_that", "min_eig_step_diff", "elapsed_s"])?;
    for row in &report.iterates {
        w.write_record([
            row.k.to_string(),
            fmt_float(row.nres),
            row.rho_that.map(fmt_float).unwrap_or_default(),
            row.min_eig_step_diff.map(fmt_float).unwrap_or_default(),
            fmt_float(row.elapsed_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run_method(
    method: Method,
    p: &CdareProblem,
    x0: &HermitianMatrix,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    match method {
        Method::Fpi => Ok(fpi_solve(p, x0, cfg)?),
        Method::FpiHat => Ok(fpi_hat_solve(p, x0, cfg)?),
        Method::Afpi => {
            let dare = DareProblem::transform(p)
                .context("transforming the problem for the accelerated iteration")?;
            Ok(afpi_solve(&dare, Some(p), x0, cfg)?)
        }
    }
}

pub fn cmd_solve(opts: &SolveOptions) -> Result<i32> {
    let problem = load_problem(&opts.problem_path)?;
    info!(
        "loaded problem {} (n={}, m={})",
        opts.problem_path.display(),
        problem.state_dim(),
        problem.input_dim()
    );
    let x0 = initial_iterate(&problem, &opts.x0)?;
    let cfg = SolverConfig {
        nres_tol: opts.tol,
        max_iters: opts.max_iters,
        r: opts.r,
        monotonicity_check: true,
        ..Default::default()
    };
    let report = run_method(opts.method, &problem, &x0, &cfg)?;
    debug!(
        "{} finished with {} after {} iterations",
        opts.method.name(),
        report.status.label(),
        report.iterations()
    );

    std::fs::create_dir_all(&opts.out_dir)
        .with_context(|| format!("creating {}", opts.out_dir.display()))?;
    let solution_path = opts.out_dir.join("solution.json");
    write_canonical(&solution_path, &SolutionFile::from_matrix(&report.solution))?;
    write_iteration_csv(&opts.out_dir.join("iterations.csv"), &report)?;
    let manifest = RunManifest {
        schema_version: format::MANIFEST_SCHEMA.into(),
        command: opts.command_echo.clone(),
        method: opts.method.name().into(),
        r: (opts.method == Method::Afpi).then_some(opts.r),
        nres_tol: opts.tol,
        max_iters: opts.max_iters,
        status: report.status.label().into(),
        iterations: report.iterations(),
        final_nres: report.final_nres(),
        wall_time_s: report.wall_time.as_secs_f64(),
        solution_path: Some(solution_path.display().to_string()),
    };
    write_canonical(&opts.out_dir.join("manifest.json"), &manifest)?;

    println!(
        "{}: {} after {} iterations, NRes {}, results in {}",
        opts.method.name(),
        report.status.label(),
        report.iterations(),
        report
            .final_nres()
            .map(fmt_float)
            .unwrap_or_else(|| "n/a".into()),
        opts.out_dir.display()
    );
    if !matches!(report.status, SolveStatus::Converged) {
        eprintln!(
            "solve did not converge: {:?} (exit {})",
            report.status,
            exit_code_for(&report.status)
        );
    }
    Ok(exit_code_for(&report.status))
}

#[derive(Clone, Debug)]
pub struct TransformOptions {
    pub problem_path: PathBuf,
    pub out_path: PathBuf,
}

pub fn cmd_transform(opts: &TransformOptions) -> Result<i32> {
    let problem = load_problem(&opts.problem_path)?;
    let dare = DareProblem::transform(&problem)?;
    write_canonical(
        &opts.out_path,
        &DareFile::from_dare(&dare, problem.input_dim()),
    )?;
    println!("wrote transformed problem to {}", opts.out_path.display());
    Ok(EXIT_OK)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Example1,
    Example2,
    Random,
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(Family::Example1),
            "example2" => Ok(Family::Example2),
            "random" => Ok(Family::Random),
            other => bail!("unknown family '{other}' (expected example1, example2 or random)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GenerateOptions {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub a: Complex64,
    pub b: Complex64,
    pub r0: f64,
    pub h: f64,
    pub regime: ProblemRegime,
    pub out_path: PathBuf,
}

/// Sidecar path for the closed-form reference solution of the analytic
/// families: `foo.json` -> `foo.reference.json`.
pub fn reference_path(out: &Path) -> PathBuf {
    match out.extension().and_then(|e| e.to_str()) {
        Some("json") => out.with_extension("reference.json"),
        _ => {
            let mut name = out.as_os_str().to_owned();
            name.push(".reference.json");
            PathBuf::from(name)
        }
    }
}

pub fn cmd_generate(opts: &GenerateOptions) -> Result<i32> {
    let (problem, reference) = match opts.family {
        Family::Example1 => {
            let params = ScalarFamilyParams::new(opts.a, opts.b, opts.r0, opts.h)?;
            let (p, x_ref) = make_example1(opts.n, &params, opts.seed)?;
            (p, Some(x_ref))
        }
        Family::Example2 => {
            let (p, x_ref) = make_example2(opts.n, opts.a, opts.b, opts.r0, opts.seed)?;
            (p, Some(x_ref))
        }
        Family::Random => (
            random_problem(opts.n, opts.m, opts.seed, opts.regime)?,
            None,
        ),
    };
    write_canonical(&opts.out_path, &ProblemFile::from_problem(&problem))?;
    println!("wrote problem to {}", opts.out_path.display());
    if let Some(x_ref) = reference {
        let ref_path = reference_path(&opts.out_path);
        write_canonical(&ref_path, &SolutionFile::from_matrix(&x_ref))?;
        println!("wrote reference solution to {}", ref_path.display());
    }
    Ok(EXIT_OK)
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub suite_path: PathBuf,
    pub methods: Vec<Method>,
    pub rs: Vec<usize>,
    pub tol: f64,
    pub max_iters: usize,
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
    pub command_echo: String,
}

struct BenchCell {
    problem_label: String,
    problem_path: PathBuf,
    method: Method,
    r: Option<usize>,
}

type CsvRow = [String; 8];

fn cell_rows(cell: &BenchCell, tol: f64, max_iters: usize) -> Vec<CsvRow> {
    let base = |status: &str| -> CsvRow {
        [
            cell.problem_label.clone(),
            cell.method.name().into(),
            cell.r.map(|r| r.to_string()).unwrap_or_default(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            status.into(),
        ]
    };
    let problem = match load_problem(&cell.problem_path) {
        Ok(p) => p,
        Err(e) => {
            warn!("{}: {e:#}", cell.problem_label);
            return vec![base(&format!("input-error: {e}"))];
        }
    };
    let x0 = match make_initial_default(&problem) {
        Ok(x0) => x0,
        Err(e) => {
            warn!("{}: {e}", cell.problem_label);
            return vec![base(&format!("input-error: {e}"))];
        }
    };
    let cfg = SolverConfig {
        nres_tol: tol,
        max_iters,
        r: cell.r.unwrap_or(2),
        monotonicity_check: false,
        ..Default::default()
    };
    let report = match run_method(cell.method, &problem, &x0, &cfg) {
        Ok(r) => r,
        Err(e) => {
            warn!("{}: {e:#}", cell.problem_label);
            return vec![base(&format!("input-error: {e}"))];
        }
    };
    let status = report.status.label().to_string();
    report
        .iterates
        .iter()
        .map(|row| {
            [
                cell.problem_label.clone(),
                cell.method.name().into(),
                cell.r.map(|r| r.to_string()).unwrap_or_default(),
                row.k.to_string(),
                fmt_float(row.nres),
                row.rho_that.map(fmt_float).unwrap_or_default(),
                fmt_float(row.elapsed_s),
                status.clone(),
            ]
        })
        .collect()
}

pub fn cmd_bench(opts: &BenchOptions) -> Result<i32> {
    let suite: SuiteFile = read_json(&opts.suite_path)?;
    if suite.schema_version != format::SUITE_SCHEMA {
        bail!(
            "unsupported suite schema '{}', expected '{}'",
            suite.schema_version,
            format::SUITE_SCHEMA
        );
    }
    if suite.problems.is_empty() {
        bail!("suite lists no problems");
    }
    let suite_dir = opts
        .suite_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();

    let mut cells = Vec::new();
    for label in &suite.problems {
        let path = suite_dir.join(label);
        for method in &opts.methods {
            match method {
                Method::Afpi => {
                    for &r in &opts.rs {
                        cells.push(BenchCell {
                            problem_label: label.clone(),
                            problem_path: path.clone(),
                            method: *method,
                            r: Some(r),
                        });
                    }
                }
                _ => cells.push(BenchCell {
                    problem_label: label.clone(),
                    problem_path: path.clone(),
                    method: *method,
                    r: None,
                }),
            }
        }
    }

    info!(
        "bench grid: {} problems x methods -> {} runs",
        suite.problems.len(),
        cells.len()
    );
    let start = Instant::now();
    let tol = opts.tol;
    let max_iters = opts.max_iters;
    let rows: Vec<Vec<CsvRow>> = batch::with_pool(opts.jobs, || {
        batch::map_auto(cells.len(), |i| cell_rows(&cells[i], tol, max_iters))
    });

    std::fs::create_dir_all(&opts.out_dir)
        .with_context(|| format!("creating {}", opts.out_dir.display()))?;
    let csv_path = opts.out_dir.join("results.csv");
    let mut w = csv::Writer::from_path(&csv_path)
        .with_context(|| format!("creating {}", csv_path.display()))?;
    w.write_record([
        "problem", "method", "r", "k", "nres", "rho", "elapsed_s", "status",
    ])?;
    let mut failures = 0usize;
    for group in &rows {
        for row in group {
            if row[7].starts_with("input-error") {
                failures += 1;
            }
            w.write_record(row)?;
        }
    }
    w.flush()?;

    let manifest = RunManifest {
        schema_version: format::MANIFEST_SCHEMA.into(),
        command: opts.command_echo.clone(),
        method: "bench".into(),
        r: None,
        nres_tol: opts.tol,
        max_iters: opts.max_iters,
        status: if failures == 0 {
            "completed".into()
        } else {
            format!("completed with {failures} failed runs")
        },
        iterations: cells.len(),
        final_nres: None,
        wall_time_s: start.elapsed().as_secs_f64(),
        solution_path: Some(csv_path.display().to_string()),
    };
    write_canonical(&opts.out_dir.join("manifest.json"), &manifest)?;
    println!(
        "bench: {} runs over {} problems, {} failures, results in {}",
        cells.len(),
        suite.problems.len(),
        failures,
        csv_path.display()
    );
    Ok(EXIT_OK)
}
