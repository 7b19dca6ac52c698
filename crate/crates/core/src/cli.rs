//! Command-line front end. Every subcommand prints JSON (or CSV with
//! `--csv`) and maps outcomes to exit codes: 0 success, 1 inconclusive or
//! failed check, 2 input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::certify::{self, CertifyConfig, Verdict};
use crate::error::{Error, Result};
use crate::harness;
use crate::io;
use crate::linalg::{self, Matrix};
use crate::operators::{counterexample_point, ProblemInstance};
use crate::solver::{self, SolverConfig};
use crate::subgeom;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCONCLUSIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

// rank cutoff for points produced by the solver rather than supplied exactly
const SOLVED_RANK_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "nucnorm", version, about = "Nuclear-norm minimization with uniqueness certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize ||X||_* subject to A(X) = b.
    Solve(SolveArgs),
    /// Minimize 1/2 ||A(X) - b||^2 + lambda ||X||_*.
    SolveReg(SolveArgs),
    /// Decide whether a solution is unique, with a second solution if not.
    Certify(CertifyArgs),
    /// Test whether two matrices span a flat of the nuclear-norm sphere.
    Flat(FlatArgs),
    /// Polar factor of a matrix.
    Polarize(PolarizeArgs),
    /// Check the pinned values of the built-in 2x2 instance.
    Counterexample(OutputArgs),
    /// Run the seeded property batteries.
    Harness(HarnessArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write output here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Instance JSON, or `counterexample` for the built-in instance.
    #[arg(long)]
    instance: String,
    /// Regularization weight; overrides the instance value.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit the solution matrix as CSV instead of the JSON report.
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long)]
    instance: String,
    /// Candidate solution; solved for when absent.
    #[arg(long)]
    xbar: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    starts: usize,
    /// Emit the second solution as CSV instead of the JSON report.
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct FlatArgs {
    first: PathBuf,
    second: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct PolarizeArgs {
    matrix: PathBuf,
    /// Emit the polar factor as CSV.
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct HarnessArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

/// Runs the CLI on `argv` (program name first), writing to standard output.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok((output, code)) => match emit(&output, out) {
            Ok(()) => code,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_INPUT
            }
        },
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

struct Output {
    text: String,
    path: Option<PathBuf>,
}

fn emit(output: &Output, out: &mut dyn Write) -> std::io::Result<()> {
    match &output.path {
        Some(p) => std::fs::write(p, &output.text),
        None => out.write_all(output.text.as_bytes()),
    }
}

fn json_output(v: &Value, out: &OutputArgs) -> Output {
    Output {
        text: format!("{}\n", serde_json::to_string_pretty(v).expect("serializable")),
        path: out.out.clone(),
    }
}

fn load_instance(spec: &str) -> Result<ProblemInstance> {
    if spec == "counterexample" {
        return Ok(ProblemInstance::counterexample());
    }
    io::read_instance(Path::new(spec))
}

fn dispatch(cmd: Command) -> Result<(Output, i32)> {
    match cmd {
        Command::Solve(a) => solve(a, false),
        Command::SolveReg(a) => solve(a, true),
        Command::Certify(a) => certify_cmd(a),
        Command::Flat(a) => flat(a),
        Command::Polarize(a) => polarize(a),
        Command::Counterexample(a) => {
            let rep = harness::counterexample_regression()?;
            let code = if rep.passed { EXIT_OK } else { EXIT_INCONCLUSIVE };
            Ok((json_output(&serde_json::to_value(&rep).expect("serializable"), &a), code))
        }
        Command::Harness(a) => {
            let reports = harness::run_batteries(a.seed);
            let passed = reports.iter().all(|r| r.ok());
            let v = json!({ "seed": a.seed, "passed": passed, "batteries": reports });
            Ok((json_output(&v, &a.output), if passed { EXIT_OK } else { EXIT_INCONCLUSIVE }))
        }
    }
}

fn solver_config(tol: f64, seed: u64) -> Result<SolverConfig> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::parse("--tol", "must be a positive number"));
    }
    Ok(SolverConfig {
        tol_primal: tol,
        tol_dual: tol,
        seed,
        max_iter: 20_000,
        ..Default::default()
    })
}

fn solve(a: SolveArgs, regularized: bool) -> Result<(Output, i32)> {
    let inst = load_instance(&a.instance)?;
    let cfg = solver_config(a.tol, a.seed)?;
    let rep = if regularized {
        let lambda = a
            .lambda
            .or(inst.lambda)
            .ok_or_else(|| Error::parse("lambda", "solve-reg needs --lambda or an instance lambda"))?;
        solver::solve_regularized(&inst.op, &inst.b, lambda, &cfg)?
    } else {
        solver::solve_affine(&inst.op, &inst.b, &cfg)?
    };
    let output = if a.csv {
        Output {
            text: io::matrix_to_csv(&rep.x),
            path: a.output.out.clone(),
        }
    } else {
        json_output(&io::solve_report_json(&rep), &a.output)
    };
    Ok((output, if rep.converged { EXIT_OK } else { EXIT_INCONCLUSIVE }))
}

fn certify_cmd(a: CertifyArgs) -> Result<(Output, i32)> {
    let inst = load_instance(&a.instance)?;
    let mut cfg = CertifyConfig {
        tol: a.tol,
        seed: a.seed,
        starts: a.starts,
        ..Default::default()
    };
    let xbar = match &a.xbar {
        Some(p) => io::read_matrix(p)?,
        None if a.instance == "counterexample" => counterexample_point(),
        None => {
            let scfg = SolverConfig {
                tol_primal: 1e-10,
                tol_dual: 1e-10,
                max_iter: 50_000,
                seed: a.seed,
                ..Default::default()
            };
            cfg.rank_tol = SOLVED_RANK_TOL;
            solver::solve_affine(&inst.op, &inst.b, &scfg)?.x
        }
    };
    if xbar.shape() != (inst.op.n(), inst.op.p()) {
        return Err(Error::parse(
            "xbar",
            format!("expected {}x{}, found {}x{}", inst.op.n(), inst.op.p(), xbar.nrows(), xbar.ncols()),
        ));
    }
    let rep = certify::certify_uniqueness(&inst.op, &inst.b, &xbar, &cfg)?;
    let code = if rep.verdict == Verdict::Inconclusive { EXIT_INCONCLUSIVE } else { EXIT_OK };
    let output = match (&rep.second_solution, a.csv) {
        (Some(x), true) => Output {
            text: io::matrix_to_csv(x),
            path: a.output.out.clone(),
        },
        _ => json_output(&io::uniqueness_report_json(&rep), &a.output),
    };
    Ok((output, code))
}

fn flat(a: FlatArgs) -> Result<(Output, i32)> {
    let x1 = io::read_matrix(&a.first)?;
    let x2 = io::read_matrix(&a.second)?;
    if x1.shape() != x2.shape() {
        return Err(Error::parse(a.second.display().to_string(), "shape differs from the first matrix"));
    }
    let flat = subgeom::is_flat_segment(&x1, &x2, a.tol)?;
    let (t1, t2, wide) = tall_pair(&x1, &x2);
    let common = subgeom::common_polarizer(&t1, &t2, a.tol)?.map(|u| if wide { u.transpose() } else { u });
    let mut v = json!({ "flat": flat });
    if let Some(u) = common.filter(|_| flat) {
        v["common_polarizer"] = io::matrix_to_json(&u);
    }
    Ok((json_output(&v, &a.output), EXIT_OK))
}

fn tall_pair(x1: &Matrix, x2: &Matrix) -> (Matrix, Matrix, bool) {
    if x1.nrows() < x1.ncols() {
        (x1.transpose(), x2.transpose(), true)
    } else {
        (x1.clone(), x2.clone(), false)
    }
}

fn polarize(a: PolarizeArgs) -> Result<(Output, i32)> {
    let x = io::read_matrix(&a.matrix)?;
    let u = if x.nrows() < x.ncols() {
        subgeom::polarize(&x.transpose())?.transpose()
    } else {
        subgeom::polarize(&x)?
    };
    if a.csv {
        return Ok((
            Output {
                text: io::matrix_to_csv(&u),
                path: a.output.out.clone(),
            },
            EXIT_OK,
        ));
    }
    let min_eig = linalg::min_eig_sym(&linalg::sym(&(&x * u.transpose())))?;
    let v = json!({ "U": io::matrix_to_json(&u), "min_eig": min_eig, "nuclear_norm": linalg::nuclear_norm(&x) });
    Ok((json_output(&v, &a.output), EXIT_OK))
}
