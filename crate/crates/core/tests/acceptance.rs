//! Acceptance suite. Runs without the libtest harness so that one PASS/FAIL
//! line per criterion is always printed; exits nonzero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zocop::apps::{self, Task};
use zocop::balm::{InnerSolve, InnerTermination, Variant};
use zocop::ialm::{
    self, ialm_solve_observed, verify_descent_trace, IterateState, Mode, SolveObserver, SolveOptions,
    SolveReport, SolveStatus,
};
use zocop::oracle::{enumerate_stationary, prox_oracle, solve_pattern, verify_sigma_constant};
use zocop::problem::{positive_count, spectral_info_default};
use zocop::zeroone::{alpha_thresholds, prox_distance, prox_threshold, prox_zero_one, p_tilde_residual, subdifferential_member};
use zocop::{CopProblem, SmoothObjective};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(elapsed: Duration, limit_secs: f64, what: &str) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_secs {
        Ok(())
    } else {
        Err(format!("{what} took {elapsed:?}, limit {limit_secs} s"))
    }
}

fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_vec(x.to_vec())
}

// ---------------------------------------------------------------------------
// 1

fn prox_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for draw in 0..10_000 {
        let lambda = rng.random_range(0.1..5.0);
        let alpha = rng.random_range(0.05..2.0);
        let r = prox_threshold(lambda, alpha);
        let center = r * rng.random_range(-2.0..3.0);
        let canonical = prox_zero_one(&dv(&[center]), lambda, alpha).map_err(|e| e.to_string())?.canonical[0];
        let oracle = prox_oracle(center, lambda, alpha, 1e-3);
        let g = |t: f64| if t > 0.0 { lambda } else { 0.0 } + (t - center).powi(2) / (2.0 * alpha);
        let near = oracle.argmin_set.iter().any(|&t| (t - canonical).abs() <= 1e-4);
        ensure!(near, "draw {draw}: prox {canonical} not in oracle argmin {:?}", oracle.argmin_set);
        ensure!(
            (g(canonical) - oracle.min_value).abs() <= 1e-8,
            "draw {draw}: objective {} vs oracle {}",
            g(canonical),
            oracle.min_value
        );
    }
    within(start.elapsed(), 5.0, "10,000 draws")?;
    Ok(format!("10000 draws in {:.2?}", start.elapsed()))
}

// ---------------------------------------------------------------------------
// 2

/// Random prox fixed point: each component is negative, at or above the
/// threshold, or zero with `alpha z` strictly below the threshold.
fn random_fixed_point(rng: &mut ChaCha8Rng, lambda: f64, alpha: f64) -> (DVector<f64>, DVector<f64>) {
    let dim = rng.random_range(1..=6);
    let r = prox_threshold(lambda, alpha);
    let mut u = DVector::zeros(dim);
    let mut z = DVector::zeros(dim);
    for i in 0..dim {
        match rng.random_range(0..4) {
            0 => u[i] = -rng.random_range(0.0..3.0),
            1 => u[i] = r + rng.random_range(0.0..3.0),
            2 => z[i] = rng.random_range(0.0..1.0) * r / alpha,
            _ => {}
        }
    }
    (u, z)
}

fn stationarity_hierarchy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for pair in 0..1000 {
        let lambda = rng.random_range(0.1..10.0);
        let alpha = rng.random_range(0.01..5.0);
        let (u, z) = random_fixed_point(&mut rng, lambda, alpha);
        let d = prox_distance(&u, &(&u + &z * alpha), lambda, alpha).map_err(|e| e.to_string())?;
        ensure!(d == 0.0, "pair {pair}: generated pair is not a fixed point (residual {d})");
        ensure!(subdifferential_member(&z, &u), "pair {pair}: fixed point outside the subdifferential");
    }
    let (lambda, alpha): (f64, f64) = (1.5, 0.4);
    let u = dv(&[0.0]);
    let z = dv(&[2.0 * prox_threshold(lambda, alpha) / alpha]);
    let prox_holds = prox_distance(&u, &(&u + &z * alpha), lambda, alpha).map_err(|e| e.to_string())? == 0.0;
    ensure!(!prox_holds, "counterexample unexpectedly satisfies the prox fixed point");
    ensure!(subdifferential_member(&z, &u), "counterexample is not in the subdifferential");
    Ok("1000 fixed points in the subdifferential; converse counterexample confirmed".into())
}

// ---------------------------------------------------------------------------
// 3

fn threshold_sharpness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut finite, mut infinite) = (0, 0);
    for case in 0..100 {
        let lambda = rng.random_range(0.1..10.0);
        let dim = rng.random_range(1..=6);
        let mut u = DVector::zeros(dim);
        let mut z = DVector::zeros(dim);
        for i in 0..dim {
            match rng.random_range(0..4) {
                0 => u[i] = -rng.random_range(0.01..3.0),
                1 => u[i] = rng.random_range(0.01..3.0),
                2 => z[i] = rng.random_range(0.01..3.0),
                _ => {}
            }
        }
        ensure!(subdifferential_member(&z, &u), "case {case}: generator broke consistency");
        let hat = alpha_thresholds(&u, &z, lambda).alpha_hat;
        let upper = hat.finite().unwrap_or(100.0);
        for _ in 0..20 {
            let alpha = upper * rng.random_range(1e-6..1.0);
            if !hat.admits(alpha) {
                continue;
            }
            let d = prox_distance(&u, &(&u + &z * alpha), lambda, alpha).map_err(|e| e.to_string())?;
            ensure!(d == 0.0, "case {case}: fixed point fails at alpha {alpha} < {hat}");
        }
        match hat.finite() {
            Some(a) => {
                finite += 1;
                let alpha = 2.0 * a;
                let d = prox_distance(&u, &(&u + &z * alpha), lambda, alpha).map_err(|e| e.to_string())?;
                ensure!(d > 0.0, "case {case}: fixed point still holds at 2 alpha_hat");
            }
            None => infinite += 1,
        }
    }
    within(start.elapsed(), 2.0, "100 cases")?;
    Ok(format!("100 cases ({finite} finite, {infinite} infinite thresholds) in {:.2?}", start.elapsed()))
}

// ---------------------------------------------------------------------------
// 4-7

#[derive(Default)]
struct InnerAudit {
    solves: usize,
    steps: usize,
    worst_descent_gap: f64,
    descent_failures: Vec<String>,
    capped: usize,
    kappa: f64,
}

impl SolveObserver for InnerAudit {
    fn on_inner(&mut self, k: usize, inner: &InnerSolve) {
        self.solves += 1;
        if inner.terminated_by == InnerTermination::MaxIters {
            self.capped += 1;
        }
        let mut prev = inner.initial_lyapunov;
        for row in &inner.trace {
            self.steps += 1;
            let gap = self.kappa * row.step_w * row.step_w - (prev - row.lyapunov);
            self.worst_descent_gap = self.worst_descent_gap.max(gap);
            if gap > 1e-9 && self.descent_failures.len() < 3 {
                self.descent_failures.push(format!("outer {k} inner {}: shortfall {gap:e}", row.j));
            }
            prev = row.lyapunov;
        }
    }
}

struct CertifiedRun {
    label: String,
    report: SolveReport,
    tau: f64,
    eta: f64,
    audit: InnerAudit,
    max_inner: usize,
}

fn certified_run(label: String, problem: &CopProblem, opts: &SolveOptions) -> Result<CertifiedRun, String> {
    let setup = ialm::prepare(problem, opts).map_err(|e| format!("{label}: {e}"))?;
    if setup.outer.mode != Mode::Certified {
        return Err(format!("{label}: parameters are not certified"));
    }
    let mut audit = InnerAudit {
        kappa: setup.inner.descent_constant,
        worst_descent_gap: f64::NEG_INFINITY,
        ..Default::default()
    };
    let report = ialm_solve_observed(problem, &setup.init, &setup.outer, &setup.inner, &mut audit)
        .map_err(|e| format!("{label}: {e}"))?;
    Ok(CertifiedRun {
        label,
        report,
        tau: setup.outer.tau,
        eta: setup.outer.eta,
        audit,
        max_inner: setup.inner.max_inner_iters,
    })
}

fn random_runs() -> Result<(Vec<CertifiedRun>, Duration), String> {
    let start = Instant::now();
    let mut runs = Vec::new();
    for seed in 0..20 {
        let problem = common::random_instance(seed, 10);
        for variant in [Variant::CaseI, Variant::CaseII] {
            let opts = SolveOptions {
                variant,
                max_inner: 10_000,
                ..SolveOptions::default()
            };
            runs.push(certified_run(format!("seed {seed} {variant:?}"), &problem, &opts)?);
        }
    }
    Ok((runs, start.elapsed()))
}

fn inner_descent(runs: &[CertifiedRun], elapsed: Duration) -> Outcome {
    let mut steps = 0;
    let mut worst = f64::NEG_INFINITY;
    for run in runs {
        ensure!(
            run.audit.descent_failures.is_empty(),
            "{}: {}",
            run.label,
            run.audit.descent_failures.join("; ")
        );
        steps += run.audit.steps;
        worst = worst.max(run.audit.worst_descent_gap);
    }
    within(elapsed, 30.0, "20 instances x 2 variants")?;
    Ok(format!(
        "{} runs, {steps} inner steps, worst shortfall {worst:.3e} (tolerance 1e-9), {elapsed:.2?}",
        runs.len()
    ))
}

fn finite_inner_termination(runs: &[CertifiedRun]) -> Outcome {
    let mut solves = 0;
    for run in runs {
        ensure!(run.max_inner == 10_000, "{}: max_inner is {}", run.label, run.max_inner);
        ensure!(run.audit.capped == 0, "{}: {} inner solves hit the cap", run.label, run.audit.capped);
        solves += run.audit.solves;
    }
    Ok(format!("{solves} inner solves, all stopped by the inexactness criteria"))
}

fn outer_merit_descent(runs: &[&CertifiedRun]) -> Outcome {
    let mut checked = 0;
    for run in runs {
        let trace = &run.report.trace;
        ensure!(trace.len() >= 2, "{}: only {} outer records", run.label, trace.len());
        let check = verify_descent_trace(trace, run.tau, run.eta, 1e-9, 1e-5).map_err(|e| e.to_string())?;
        ensure!(
            check.holds,
            "{}: merit descent fails at k={:?} (violation {:e})",
            run.label,
            check.first_violation_k,
            check.worst_violation
        );
        let last = trace.last().unwrap();
        ensure!(
            check.steps_vanished,
            "{}: final steps w={:e} u={:e} z={:e}",
            run.label,
            last.step_w,
            last.step_u,
            last.step_z
        );
        checked += 1;
    }
    Ok(format!("{checked} certified runs satisfy merit descent with vanishing steps"))
}

fn p_stationarity(runs: &[CertifiedRun]) -> Outcome {
    let mut max_outer = 0;
    for run in runs {
        let r = &run.report;
        ensure!(r.status == SolveStatus::PStationary, "{}: status {:?}", run.label, r.status);
        ensure!(r.certificate.max_residual <= 1e-6, "{}: residual {:e}", run.label, r.certificate.max_residual);
        ensure!(r.certificate.r_feas <= 1e-6, "{}: feasibility {:e}", run.label, r.certificate.r_feas);
        ensure!(r.outer_iterations <= 500, "{}: {} outer iterations", run.label, r.outer_iterations);
        max_outer = max_outer.max(r.outer_iterations);
    }
    Ok(format!("{} runs P-stationary, at most {max_outer} outer iterations", runs.len()))
}

// ---------------------------------------------------------------------------
// 8-9

struct OracleCase {
    problem: CopProblem,
    run: CertifiedRun,
    candidates: Vec<zocop::oracle::StationaryCandidate>,
}

fn oracle_cases() -> Result<(Vec<OracleCase>, Duration), String> {
    let start = Instant::now();
    let mut cases = Vec::new();
    for seed in 100..110 {
        let problem = common::random_instance(seed, 8);
        ensure!(spectral_info_default(problem.a()).full_row_rank, "seed {seed}: A not full row rank");
        let run = certified_run(format!("oracle seed {seed}"), &problem, &SolveOptions::default())?;
        let alpha = 1.0 / ialm::prepare(&problem, &SolveOptions::default()).unwrap().outer.rho;
        let candidates = enumerate_stationary(&problem, alpha, 1e-9).map_err(|e| e.to_string())?;
        cases.push(OracleCase {
            problem,
            run,
            candidates,
        });
    }
    Ok((cases, start.elapsed()))
}

fn oracle_equivalence(cases: &[OracleCase], elapsed: Duration) -> Outcome {
    let mut worst = 0.0_f64;
    for case in cases {
        let s = &case.run.report.final_state;
        ensure!(case.problem.n() <= 8, "{}: n = {}", case.run.label, case.problem.n());
        let best = case
            .candidates
            .iter()
            .map(|c| {
                let d = (&c.w - &s.w).amax().max((&c.u - &s.u).amax()).max((&c.z - &s.z).amax());
                (d, positive_count(&c.u))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let Some((dist, loss)) = best else {
            return Err(format!("{}: enumeration returned no candidates", case.run.label));
        };
        ensure!(dist <= 1e-5, "{}: nearest candidate at distance {dist:e}", case.run.label);
        ensure!(
            loss == positive_count(&s.u),
            "{}: loss {} vs candidate {loss}",
            case.run.label,
            positive_count(&s.u)
        );
        worst = worst.max(dist);
    }
    within(elapsed, 60.0, "10 oracle instances")?;
    Ok(format!("10 instances matched, worst distance {worst:.2e}, {elapsed:.2?}"))
}

fn exact_penalty_forward(cases: &[OracleCase]) -> Outcome {
    let mut count = 0;
    let mut worst = 0.0_f64;
    for case in cases {
        let alpha = 1.0 / ialm::prepare(&case.problem, &SolveOptions::default()).unwrap().outer.rho;
        for c in &case.candidates {
            for (mu, rho) in [(1.0, 1.0), (1.0, 10.0), (10.0, 1.0)] {
                let r = p_tilde_residual(&case.problem, &c.w, &c.u, &c.z, &c.w, &c.z, mu, rho, alpha)
                    .map_err(|e| e.to_string())?;
                ensure!(
                    r.max_residual <= 1e-10,
                    "{}: candidate {:?} residual {:e} at (mu, rho) = ({mu}, {rho})",
                    case.run.label,
                    c.sign_pattern,
                    r.max_residual
                );
                worst = worst.max(r.max_residual);
            }
            count += 1;
        }
    }
    Ok(format!("{count} candidates x 3 parameter pairs, worst residual {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 10

fn sigma_constant() -> Outcome {
    let mut combos = 0;
    for (i, &sigma_f) in [0.5, 1.0, 2.0].iter().enumerate() {
        for (j, &(rho, mu)) in [(1.0, 1.0), (10.0, 1.0), (1.0, 10.0)].iter().enumerate() {
            let norm_a = [0.5, 1.0, 3.0][(i + j) % 3];
            let check = verify_sigma_constant(sigma_f, rho, mu, norm_a, 200, (10 * i + j) as u64);
            ensure!(
                check.holds,
                "sigma_f={sigma_f} rho={rho} mu={mu} ||A||={norm_a}: violation {:e}",
                check.worst_violation
            );
            combos += 1;
        }
    }
    Ok(format!("{combos} parameter combinations x 200 point pairs"))
}

// ---------------------------------------------------------------------------
// 11

fn svm_end_to_end() -> Result<(String, CertifiedRun), String> {
    let seed = 7;
    let data = apps::separable_2d(40, 0.5, seed);
    for (i, row) in data.x.row_iter().enumerate() {
        let d = row[0] * data.normal[0] + row[1] * data.normal[1] - data.offset;
        ensure!(d * data.y[i] >= 0.5, "point {i} has margin {}", d * data.y[i]);
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("toy.libsvm");
    let bin = env!("CARGO_BIN_EXE_zocop");
    let synth = Command::new(bin)
        .args(["synth-svm", "--n", "40", "--margin", "0.5", "--seed", &seed.to_string(), "--out"])
        .arg(&path)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(synth.status.success(), "synth-svm failed: {}", String::from_utf8_lossy(&synth.stderr));

    let dataset = zocop::io::read_libsvm(&path).map_err(|e| e.to_string())?;
    ensure!(dataset.x.columns(0, 2) == data.x, "written dataset differs from the generator output");
    let problem = apps::build_svm(&dataset, 10.0).map_err(|e| e.to_string())?;
    let spectral = spectral_info_default(problem.a());
    ensure!(problem.n() <= problem.p() && spectral.full_row_rank, "lifted A is not full row rank");

    let start = Instant::now();
    let out = Command::new(bin)
        .args(["svm", "--lambda", "10", "--data"])
        .arg(&path)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    ensure!(out.status.code() == Some(0), "exit {:?}: {stdout}{}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    ensure!(stdout.lines().any(|l| l == "zero_one_loss=0"), "summary: {stdout}");
    ensure!(stdout.lines().any(|l| l == "accuracy=1"), "summary: {stdout}");
    within(elapsed, 5.0, "svm command")?;

    let run = certified_run("svm".into(), &problem, &SolveOptions::default())?;
    let eval = apps::evaluate(std::slice::from_ref(&run.report.final_state.w), &dataset, Task::Svm).map_err(|e| e.to_string())?;
    ensure!(eval.accuracy == 1.0, "library run: {eval:?}");
    ensure!(run.report.zero_one_loss() == 0, "library run loss {}", run.report.zero_one_loss());
    // Active margins sit at 1 up to the feasibility tolerance.
    let violations = problem.affine(&run.report.final_state.w).iter().filter(|&&v| v > 1e-6).count();
    ensure!(violations == 0, "{violations} margins violated beyond the feasibility tolerance");
    Ok((
        format!(
            "n=40 p={} gamma={:.2}: loss 0, accuracy 1.0, CLI {elapsed:.2?}",
            problem.p(),
            spectral.gamma
        ),
        run,
    ))
}

// ---------------------------------------------------------------------------
// 12

fn mrc_end_to_end() -> Result<(String, CertifiedRun), String> {
    let xi = apps::DEFAULT_MRC_XI;
    let data = common::monotone_data(12, 0.4);
    let mrc = apps::build_mrc(&data.x, &data.y, 1.0, 10.0, xi).map_err(|e| e.to_string())?;
    let w_star = data.w_star.clone().insert_row(data.w_star.len(), 0.0);
    let scores = &mrc.x_sorted * &w_star;
    for i in 0..scores.len() - 1 {
        ensure!(scores[i + 1] - scores[i] > xi, "w* gap {} at {i}", scores[i + 1] - scores[i]);
    }
    ensure!(positive_count(&mrc.problem.affine(&w_star)) == 0, "w* has nonzero 0/1 term");
    ensure!(mrc.problem.n() == 14, "expected 14 constraint rows");

    let run = certified_run("mrc".into(), &mrc.problem, &SolveOptions::default())?;
    let r = &run.report;
    ensure!(r.status == SolveStatus::PStationary, "status {:?}", r.status);
    ensure!(r.zero_one_loss() == 0, "0/1 term {}", r.zero_one_loss());
    let alpha = 1.0 / ialm::prepare(&mrc.problem, &SolveOptions::default()).unwrap().outer.rho;
    let all: Vec<usize> = (0..mrc.problem.n()).collect();
    let best = solve_pattern(&mrc.problem, &all, alpha)
        .map_err(|e| e.to_string())?
        .ok_or("all-rows pattern infeasible")?;
    ensure!(best.residual.max_residual <= 1e-8, "reference is not P-stationary: {:e}", best.residual.max_residual);
    let ridge = mrc.problem.objective().value(&r.final_state.w);
    ensure!((ridge - best.objective).abs() <= 1e-4, "ridge {ridge} vs reference {}", best.objective);
    Ok((
        format!("0/1 term 0, ridge {ridge:.6} vs reference {:.6}", best.objective),
        run,
    ))
}

// ---------------------------------------------------------------------------
// 13

struct States(Vec<IterateState>);

impl SolveObserver for States {
    fn on_state(&mut self, _k: usize, state: &IterateState) {
        self.0.push(state.clone());
    }
}

/// Proximal linearized ADMM written out directly.
fn pl_admm(problem: &CopProblem, mu: f64, rho: f64, steps: usize) -> Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let a = problem.a();
    let b = problem.b();
    let threshold = (2.0 * problem.lambda() / rho).sqrt();
    let mut w = DVector::zeros(problem.p());
    let mut z = DVector::zeros(problem.n());
    let mut out = Vec::new();
    for _ in 0..steps {
        let s = a * &w + b + &z / rho;
        let mut u = s.clone();
        let mut t_set = Vec::new();
        for i in 0..s.len() {
            if s[i] > 0.0 && s[i] <= threshold {
                u[i] = 0.0;
                t_set.push(i);
            }
        }
        let inner = a * &w + b - &u + &z / rho;
        let mut corr = DVector::zeros(problem.p());
        for &i in &t_set {
            corr += a.row(i).transpose() * inner[i];
        }
        w = &w - (problem.objective().gradient(&w) + corr * rho) / mu;
        z = &z + (a * &w + b - &u) * rho;
        out.push((w.clone(), u, z.clone()));
    }
    out
}

fn degeneration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (n, p) = (5, 8);
    let mut a = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let norm = a.clone().svd(false, false).singular_values.max();
    a /= norm;
    let b = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
    let c = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
    let f = SmoothObjective::quadratic(DMatrix::identity(p, p), c, 0.0).map_err(|e| e.to_string())?;
    let problem = CopProblem::new(f, a, b, 0.05).map_err(|e| e.to_string())?;

    let (mu, rho) = (10.0, 1.0);
    let opts = SolveOptions {
        mu,
        rho: Some(rho),
        mode: Mode::Practical,
        variant: Variant::CaseI,
        t: Some(0.0),
        max_inner: 1,
        max_outer: 10,
        tol_outer: 1e-300,
        tol_feas: 1e-300,
        ..SolveOptions::default()
    };
    let setup = ialm::prepare(&problem, &opts).map_err(|e| e.to_string())?;
    let mut states = States(Vec::new());
    ialm_solve_observed(&problem, &setup.init, &setup.outer, &setup.inner, &mut states).map_err(|e| e.to_string())?;
    let reference = pl_admm(&problem, mu, rho, 10);
    ensure!(states.0.len() == 10, "IALM produced {} iterates", states.0.len());
    let mut worst = 0.0_f64;
    let mut zeroed = 0;
    for (k, (s, (w, u, z))) in states.0.iter().zip(&reference).enumerate() {
        let d = (&s.w - w).amax().max((&s.u - u).amax()).max((&s.z - z).amax());
        ensure!(d <= 1e-12, "step {}: deviation {d:e}", k + 1);
        worst = worst.max(d);
        zeroed += u.iter().filter(|&&x| x == 0.0).count();
    }
    ensure!(zeroed > 0, "instance never exercises the thresholding branch");
    Ok(format!("10 steps, worst deviation {worst:.2e}"))
}

// ---------------------------------------------------------------------------

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(panic) => Err(panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "prox oracle equivalence", guarded(prox_oracle_equivalence)));
    results.push((2, "stationarity hierarchy", guarded(stationarity_hierarchy)));
    results.push((3, "threshold sharpness", guarded(threshold_sharpness)));

    let random = guarded(random_runs);
    let oracle = guarded(oracle_cases);
    let svm = guarded(svm_end_to_end);
    let mrc = guarded(mrc_end_to_end);

    match &random {
        Ok((runs, elapsed)) => {
            results.push((4, "inner descent", guarded(|| inner_descent(runs, *elapsed))));
            results.push((5, "finite inner termination", guarded(|| finite_inner_termination(runs))));
        }
        Err(e) => {
            results.push((4, "inner descent", Err(e.clone())));
            results.push((5, "finite inner termination", Err(e.clone())));
        }
    }

    let merit = guarded(|| {
        let mut all: Vec<&CertifiedRun> = Vec::new();
        all.extend(random.as_ref().map_err(Clone::clone)?.0.iter());
        all.extend(oracle.as_ref().map_err(Clone::clone)?.0.iter().map(|c| &c.run));
        all.push(&svm.as_ref().map_err(Clone::clone)?.1);
        all.push(&mrc.as_ref().map_err(Clone::clone)?.1);
        outer_merit_descent(&all)
    });
    results.push((6, "outer merit descent", merit));
    results.push((
        7,
        "P-stationarity certificate",
        guarded(|| p_stationarity(&random.as_ref().map_err(Clone::clone)?.0)),
    ));

    match &oracle {
        Ok((cases, elapsed)) => {
            results.push((8, "oracle equivalence", guarded(|| oracle_equivalence(cases, *elapsed))));
            results.push((9, "exact penalty forward map", guarded(|| exact_penalty_forward(cases))));
        }
        Err(e) => {
            results.push((8, "oracle equivalence", Err(e.clone())));
            results.push((9, "exact penalty forward map", Err(e.clone())));
        }
    }
    results.push((10, "sigma constant", guarded(sigma_constant)));
    results.push((11, "end-to-end SVM", svm.as_ref().map(|(s, _)| s.clone()).map_err(Clone::clone)));
    results.push((12, "end-to-end MRC", mrc.as_ref().map(|(s, _)| s.clone()).map_err(Clone::clone)));
    results.push((13, "PL-ADMM degeneration", guarded(degeneration)));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
