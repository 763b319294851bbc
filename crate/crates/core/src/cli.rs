//! Command-line front end.
//!
//! Exit codes: 0 when a solve ends P-stationary (or a check holds), 2 when it
//! stops on the iteration cap or a check fails, 3 on invalid arguments or
//! configuration, 4 on I/O and data-format errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use crate::apps::{self, LabeledDataset, Task};
use crate::balm::Variant;
use crate::error::{Error, Result};
use crate::ialm::{self, Mode, SolveOptions, SolveReport, SolveStatus};
use crate::io;
use crate::oracle;
use crate::problem::CopProblem;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "zocop", version, about = "Solver for zero-one composite optimization problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a 0/1-loss SVM on a LIBSVM file.
    Svm {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Binary-relevance multi-label classification on a multi-label LIBSVM file.
    Mlc {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lambda: f64,
        /// Number of labels (defaults to the largest label id plus one).
        #[arg(long)]
        labels: Option<usize>,
        /// Worker threads for the per-label solves.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Ridge regression with a rank-correlation penalty on a CSV file.
    Mrc {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lambda1: f64,
        #[arg(long)]
        lambda2: f64,
        #[arg(long, default_value_t = apps::DEFAULT_MRC_XI)]
        xi: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Twin SVM on a LIBSVM file.
    Tsvm {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lambda1: f64,
        #[arg(long)]
        lambda2: f64,
        #[arg(long)]
        lambda3: f64,
        #[arg(long)]
        lambda4: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve a quadratic problem given as a key=value file.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Check the merit descent of a trace file.
    Diagnose {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        mu: f64,
        /// Merit weight; inferred from the trace when omitted.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        slack: f64,
        #[arg(long, default_value_t = 1e-5)]
        vanishing_tol: f64,
    },
    /// Compare the solver against exhaustive enumeration of stationary points.
    OracleCheck {
        #[arg(long)]
        problem: PathBuf,
        /// Prox parameter for the enumeration (defaults to 1/rho).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1e-5)]
        match_tol: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Write a seeded, linearly separable 2-D dataset with lifted features.
    SynthSvm {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        margin: f64,
        #[arg(long, default_value_t = 300)]
        lift: usize,
        #[arg(long, default_value_t = 1.0)]
        lift_scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Certified,
    Practical,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Case1,
    Case2,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Certified)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = VariantArg::Case1)]
    variant: VariantArg,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    epsilon0: Option<f64>,
    /// Inner proximal weight `t`.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, default_value_t = 1.01)]
    safety: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_outer: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_feas: f64,
    #[arg(long, default_value_t = 500)]
    max_outer: usize,
    #[arg(long, default_value_t = 10_000)]
    max_inner: usize,
    /// Reject rank-deficient constraint matrices.
    #[arg(long)]
    strict_rank: bool,
    /// Write the outer trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl SolverArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            mu: self.mu,
            safety: self.safety,
            variant: match self.variant {
                VariantArg::Case1 => Variant::CaseI,
                VariantArg::Case2 => Variant::CaseII,
            },
            mode: match self.mode {
                ModeArg::Certified => Mode::Certified,
                ModeArg::Practical => Mode::Practical,
            },
            rho: self.rho,
            eta: self.eta,
            epsilon0: self.epsilon0,
            t: self.t,
            tol_outer: self.tol_outer,
            tol_feas: self.tol_feas,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            strict_rank: self.strict_rank,
            ..SolveOptions::default()
        }
    }
}

/// Flat `key=value` result lines.
#[derive(Default)]
struct Summary(Vec<(String, String)>);

impl Summary {
    fn put(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.push((key.into(), value.to_string()));
    }

    fn report(&mut self, prefix: &str, r: &SolveReport) {
        self.put(format!("{prefix}status"), r.status.as_str());
        self.put(format!("{prefix}objective"), r.objective);
        self.put(format!("{prefix}zero_one_loss"), r.zero_one_loss());
        self.put(format!("{prefix}residual_max"), r.certificate.max_residual);
        self.put(format!("{prefix}residual_grad"), r.certificate.r_grad);
        self.put(format!("{prefix}residual_prox"), r.certificate.r_prox);
        self.put(format!("{prefix}residual_feas"), r.certificate.r_feas);
        self.put(format!("{prefix}outer_iterations"), r.outer_iterations);
        self.put(format!("{prefix}inner_iterations"), r.inner_iterations);
    }

    fn write(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(out, "{k}={v}")?;
        }
        Ok(())
    }
}

fn exit_for(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::PStationary => EXIT_OK,
        _ => EXIT_NOT_CONVERGED,
    }
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Parse { .. } => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

fn solve_with_trace(problem: &CopProblem, args: &SolverArgs) -> Result<SolveReport> {
    let report = ialm::solve(problem, &args.options())?;
    if let Some(path) = &args.trace {
        io::write_trace(&report.trace, path)?;
    }
    Ok(report)
}

fn combined_exit(reports: &[&SolveReport]) -> i32 {
    reports.iter().map(|r| exit_for(r.status)).max().unwrap_or(EXIT_OK)
}

fn run_command(command: Command, summary: &mut Summary) -> Result<i32> {
    match command {
        Command::Svm { data, lambda, solver } => {
            let data = io::read_libsvm(&data)?;
            let problem = apps::build_svm(&data, lambda)?;
            let report = solve_with_trace(&problem, &solver)?;
            summary.report("", &report);
            let eval = apps::evaluate(std::slice::from_ref(&report.final_state.w), &data, Task::Svm)?;
            summary.put("accuracy", eval.accuracy);
            summary.put("margin_violations", margin_violations(&problem, &report, solver.tol_feas));
            Ok(exit_for(report.status))
        }
        Command::Mlc {
            data,
            lambda,
            labels,
            jobs,
            solver,
        } => {
            let data = io::read_libsvm_multilabel(&data, labels)?;
            let problems = apps::build_mlc(&data, lambda)?;
            let reports = apps::solve_many(&problems, &solver.options(), jobs)?;
            let models: Vec<DVector<f64>> = reports.iter().map(|r| r.final_state.w.clone()).collect();
            let eval = apps::evaluate(&models, &data, Task::Mlc)?;
            let code = combined_exit(&reports.iter().collect::<Vec<_>>());
            summary.put("status", if code == EXIT_OK { "PStationary" } else { "MaxIters" });
            summary.put("labels", reports.len());
            summary.put("zero_one_loss", eval.zero_one_objective);
            summary.put("hamming_loss", eval.hamming_loss);
            summary.put("accuracy", eval.accuracy);
            for (k, r) in reports.iter().enumerate() {
                summary.report(&format!("label{k}_"), r);
            }
            Ok(code)
        }
        Command::Mrc {
            data,
            lambda1,
            lambda2,
            xi,
            solver,
        } => {
            let data = io::read_csv_regression(&data)?;
            let y = match &data.targets {
                apps::Targets::Real(y) => y.clone(),
                _ => unreachable!("CSV reader returns real targets"),
            };
            let mrc = apps::build_mrc(&data.x, &y, lambda1, lambda2, xi)?;
            let report = solve_with_trace(&mrc.problem, &solver)?;
            summary.report("", &report);
            summary.put("ridge_objective", mrc.problem.objective().value(&report.final_state.w));
            Ok(exit_for(report.status))
        }
        Command::Tsvm {
            data,
            lambda1,
            lambda2,
            lambda3,
            lambda4,
            solver,
        } => {
            let data = io::read_libsvm(&data)?;
            let (pos, neg) = split_classes(&data)?;
            let (p1, p2) = apps::build_tsvm(&pos, &neg, (lambda1, lambda2, lambda3, lambda4))?;
            let opts = solver.options();
            let r1 = ialm::solve(&p1, &opts)?;
            let r2 = ialm::solve(&p2, &opts)?;
            summary.report("positive_", &r1);
            summary.report("negative_", &r2);
            let code = combined_exit(&[&r1, &r2]);
            summary.put("status", if code == EXIT_OK { "PStationary" } else { "MaxIters" });
            Ok(code)
        }
        Command::Solve { problem, solver } => {
            let problem = io::read_problem(&problem)?;
            let report = solve_with_trace(&problem, &solver)?;
            summary.report("", &report);
            for (i, v) in report.final_state.w.iter().enumerate() {
                summary.put(format!("w{i}"), v);
            }
            Ok(exit_for(report.status))
        }
        Command::Diagnose {
            trace,
            mu,
            eta,
            slack,
            vanishing_tol,
        } => {
            if !(mu > 0.0) {
                return Err(Error::Validation(format!("mu must be positive, got {mu}")));
            }
            let trace = io::read_trace(&trace)?;
            let eta = eta.unwrap_or_else(|| infer_eta(&trace));
            let check = ialm::verify_descent_trace(&trace, mu / 4.0, eta, slack, vanishing_tol)?;
            summary.put("holds", check.holds);
            summary.put("worst_violation", check.worst_violation);
            summary.put(
                "first_violation_k",
                check.first_violation_k.map_or("none".to_string(), |k| k.to_string()),
            );
            summary.put("steps_vanished", check.steps_vanished);
            summary.put("records", trace.len());
            Ok(if check.holds { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::OracleCheck {
            problem,
            alpha,
            match_tol,
            solver,
        } => {
            let problem = io::read_problem(&problem)?;
            let setup = ialm::prepare(&problem, &solver.options())?;
            let alpha = alpha.unwrap_or(setup.outer.alpha);
            let candidates = oracle::enumerate_stationary(&problem, alpha, 1e-6)?;
            let report = ialm::ialm_solve(&problem, &setup.init, &setup.outer, &setup.inner)?;
            let s = &report.final_state;
            let matched = candidates.iter().position(|c| {
                (&c.w - &s.w).amax() <= match_tol
                    && (&c.u - &s.u).amax() <= match_tol
                    && (&c.z - &s.z).amax() <= match_tol
                    && crate::problem::positive_count(&c.u) == report.zero_one_loss()
            });
            summary.report("", &report);
            summary.put("candidates", candidates.len());
            summary.put("matched", matched.map_or("none".to_string(), |i| i.to_string()));
            if let Some(best) = candidates.first() {
                summary.put("best_candidate_objective", best.objective);
            }
            Ok(if matched.is_some() && report.status == SolveStatus::PStationary {
                EXIT_OK
            } else {
                EXIT_NOT_CONVERGED
            })
        }
        Command::SynthSvm {
            out,
            n,
            margin,
            lift,
            lift_scale,
            seed,
        } => {
            let data = apps::separable_2d(n, margin, seed);
            let x = apps::lift_random_features(&data.x, lift, lift_scale, seed.wrapping_add(1));
            write_text(&out, &io::format_libsvm(&x, &data.y))?;
            summary.put("rows", n);
            summary.put("features", x.ncols());
            Ok(EXIT_OK)
        }
    }
}

/// Rows with `(Aw + b)_i > tol`; active margins (`u_i = 0`) are only zero up
/// to the feasibility tolerance, so an exact recount would include them.
fn margin_violations(problem: &CopProblem, report: &SolveReport, tol: f64) -> usize {
    problem.affine(&report.final_state.w).iter().filter(|&&v| v > tol).count()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

/// `eta` recovered from `merit = lyapunov_beta + eta * epsilon^2`.
fn infer_eta(trace: &[ialm::IterationRecord]) -> f64 {
    trace
        .iter()
        .find(|r| r.epsilon_k > 0.0)
        .map_or(0.0, |r| (r.merit - r.lyapunov_beta) / (r.epsilon_k * r.epsilon_k))
}

fn split_classes(data: &LabeledDataset) -> Result<(nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>)> {
    let y = match &data.targets {
        apps::Targets::Binary(y) => y,
        _ => return Err(Error::InvalidInput("twin SVM needs binary labels".into())),
    };
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] > 0.0).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] < 0.0).collect();
    Ok((data.x.select_rows(&pos), data.x.select_rows(&neg)))
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Results go to `out`, diagnostics to `err`.
pub fn run_cli_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_INVALID
                }
            };
        }
    };
    let mut summary = Summary::default();
    match run_command(cli.command, &mut summary) {
        Ok(code) => match summary.write(out) {
            Ok(()) => code,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_IO
            }
        },
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            error_code(&e)
        }
    }
}

pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_cli_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
