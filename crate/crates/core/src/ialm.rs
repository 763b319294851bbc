//! Inexact augmented Lagrangian outer loop.
//!
//! Each outer iteration approximately minimizes the Lyapunov function
//! `V_{rho,mu}(w, u, z_k, v_k)` with [`balm_solve`] to tolerance `epsilon_k`,
//! then updates the multiplier `z <- z + rho (Aw + b - u)` and resets the
//! Lyapunov variable `v <- w`.
//!
//! Parameters derived by [`derive_parameters`] satisfy
//!
//! ```text
//! rho > max(16 (c1^2 + c2^2) / mu, 6 l_f / gamma^2),  c1 = (mu + l_f)/gamma,  c2 = mu/gamma
//! alpha = 1/rho,  beta = 8 c2^2 / rho,  eta > 4 / (rho gamma^2)
//! epsilon_{k+1} / epsilon_k <= sqrt((rho gamma^2 eta - 4) / (rho gamma^2 eta + 4))
//! ```
//!
//! under which the merit sequence `V_{rho,beta}(w^k, u^k, z^k, v^{k-1}) + eta epsilon_{k-1}^2`
//! decreases by at least `mu/4 ||w^{k+1} - w^k||^2` per iteration.

use log::{debug, warn};
use nalgebra::DVector;

use crate::balm::{balm_solve, default_inner_config, InnerConfig, InnerSolve, InnerTermination, Variant};
use crate::error::{check_len, Error, Result};
use crate::problem::{positive_count, spectral_info_default, CopProblem, SpectralInfo};
use crate::zeroone::{p_residual, StationarityResidual};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Parameters satisfy the descent conditions; convergence guarantees apply.
    Certified,
    /// User-chosen parameters; descent checks are advisory.
    Practical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterConfig {
    pub mu: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub tau: f64,
    pub c1: f64,
    pub c2: f64,
    pub epsilon0: f64,
    pub epsilon_ratio: f64,
    pub tol_outer: f64,
    pub tol_feas: f64,
    pub max_outer: usize,
    pub strict_rank: bool,
    pub mode: Mode,
    /// Set when `A` failed the rank test and the parameters were derived from
    /// a substitute `gamma`.
    pub rank_deficient: bool,
}

/// `sqrt((rho gamma^2 eta - 4) / (rho gamma^2 eta + 4))`, or `None` when `eta`
/// is not above its lower bound.
pub fn epsilon_ratio_bound(rho: f64, gamma: f64, eta: f64) -> Option<f64> {
    let x = rho * gamma * gamma * eta;
    (x > 4.0).then(|| ((x - 4.0) / (x + 4.0)).sqrt())
}

/// Lower bound on `rho` required for certified runs.
pub fn rho_lower_bound(gamma: f64, mu: f64, l_f: f64) -> f64 {
    let c1 = (mu + l_f) / gamma;
    let c2 = mu / gamma;
    (16.0 * (c1 * c1 + c2 * c2) / mu).max(6.0 * l_f / (gamma * gamma))
}

fn from_rho(gamma: f64, l_f: f64, mu: f64, rho: f64, eta: f64, epsilon0: f64) -> OuterConfig {
    let c1 = (mu + l_f) / gamma;
    let c2 = mu / gamma;
    OuterConfig {
        mu,
        rho,
        alpha: 1.0 / rho,
        beta: 8.0 * c2 * c2 / rho,
        eta,
        tau: mu / 4.0,
        c1,
        c2,
        epsilon0,
        epsilon_ratio: epsilon_ratio_bound(rho, gamma, eta).unwrap_or(0.5),
        tol_outer: 1e-6,
        tol_feas: 1e-6,
        max_outer: 500,
        strict_rank: false,
        mode: Mode::Certified,
        rank_deficient: false,
    }
}

/// Certified parameter choice: `rho` is `safety` times its lower bound, `eta`
/// twice its lower bound (so `rho gamma^2 eta = 8`), and the epsilon ratio
/// equals its upper bound.
///
/// A rank-deficient `A` is an error when `strict_rank` is set. Otherwise the
/// parameters are computed with `gamma` replaced by `||A||`, the mode is
/// downgraded to [`Mode::Practical`] and a warning is logged.
pub fn derive_parameters(
    spectral: &SpectralInfo,
    l_f: f64,
    mu: f64,
    safety: f64,
    epsilon0: f64,
    strict_rank: bool,
) -> Result<OuterConfig> {
    if !(mu > 0.0) {
        return Err(Error::Validation(format!("mu must be positive, got {mu}")));
    }
    if !(safety > 1.0) {
        return Err(Error::Validation(format!("safety must be > 1, got {safety}")));
    }
    if !(epsilon0 > 0.0) {
        return Err(Error::Validation(format!("epsilon0 must be positive, got {epsilon0}")));
    }
    let deficient = !spectral.full_row_rank;
    if deficient && strict_rank {
        return Err(Error::RankDeficient { gamma: spectral.gamma });
    }
    let gamma = if deficient {
        warn!(
            "A is not full row rank (gamma = {:e}); deriving parameters with gamma = ||A|| and no convergence guarantee",
            spectral.gamma
        );
        spectral.norm_a
    } else {
        spectral.gamma
    };
    let rho = safety * rho_lower_bound(gamma, mu, l_f);
    let eta = 8.0 / (rho * gamma * gamma);
    let mut cfg = from_rho(gamma, l_f, mu, rho, eta, epsilon0);
    cfg.strict_rank = strict_rank;
    if deficient {
        cfg.mode = Mode::Practical;
        cfg.rank_deficient = true;
    }
    Ok(cfg)
}

impl OuterConfig {
    /// Replaces `rho` and/or `eta`, recomputing the dependent quantities.
    /// The epsilon ratio becomes the largest admissible value, or 0.5 when
    /// `eta` is at or below its lower bound.
    pub fn with_overrides(self, spectral: &SpectralInfo, l_f: f64, rho: Option<f64>, eta: Option<f64>) -> Self {
        if rho.is_none() && eta.is_none() {
            return self;
        }
        let gamma = if spectral.full_row_rank { spectral.gamma } else { spectral.norm_a };
        let rho = rho.unwrap_or(self.rho);
        let eta = eta.unwrap_or(8.0 / (rho * gamma * gamma));
        let mut cfg = from_rho(gamma, l_f, self.mu, rho, eta, self.epsilon0);
        cfg.tol_outer = self.tol_outer;
        cfg.tol_feas = self.tol_feas;
        cfg.max_outer = self.max_outer;
        cfg.strict_rank = self.strict_rank;
        cfg.mode = self.mode;
        cfg.rank_deficient = self.rank_deficient;
        cfg
    }

    /// Violated descent conditions, empty when the configuration is certified.
    pub fn certification_issues(&self, spectral: &SpectralInfo, l_f: f64) -> Vec<String> {
        let mut issues = Vec::new();
        if !spectral.full_row_rank {
            issues.push(format!("A is not full row rank (gamma = {:e})", spectral.gamma));
            return issues;
        }
        let gamma = spectral.gamma;
        let rho_min = rho_lower_bound(gamma, self.mu, l_f);
        if !(self.rho > rho_min) {
            issues.push(format!("rho = {} must exceed {}", self.rho, rho_min));
        }
        let eta_min = 4.0 / (self.rho * gamma * gamma);
        if !(self.eta > eta_min) {
            issues.push(format!("eta = {} must exceed {}", self.eta, eta_min));
        }
        match epsilon_ratio_bound(self.rho, gamma, self.eta) {
            Some(bound) if self.epsilon_ratio <= bound => {}
            Some(bound) => issues.push(format!("epsilon ratio {} exceeds {}", self.epsilon_ratio, bound)),
            None => {}
        }
        if (self.alpha * self.rho - 1.0).abs() > 1e-15 {
            issues.push("alpha must equal 1/rho".into());
        }
        issues
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu", self.mu),
            ("rho", self.rho),
            ("alpha", self.alpha),
            ("epsilon0", self.epsilon0),
            ("tol_outer", self.tol_outer),
            ("tol_feas", self.tol_feas),
        ];
        for (name, value) in positive {
            if !(value > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.epsilon_ratio > 0.0 && self.epsilon_ratio < 1.0) {
            return Err(Error::Validation(format!(
                "epsilon ratio must lie in (0, 1), got {}",
                self.epsilon_ratio
            )));
        }
        if self.max_outer == 0 {
            return Err(Error::Validation("max_outer must be at least 1".into()));
        }
        Ok(())
    }
}

/// One outer iterate `(w, u, z, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub w: DVector<f64>,
    pub u: DVector<f64>,
    pub z: DVector<f64>,
    pub v: DVector<f64>,
}

impl IterateState {
    /// `w = 0`, `u = b`, `z = 0`, `v = 0`; feasible by construction.
    pub fn initial(problem: &CopProblem) -> Self {
        Self {
            w: DVector::zeros(problem.p()),
            u: problem.b().clone(),
            z: DVector::zeros(problem.n()),
            v: DVector::zeros(problem.p()),
        }
    }

    fn check(&self, problem: &CopProblem) -> Result<()> {
        problem.check_primal(&self.w, &self.u)?;
        check_len("z", problem.n(), self.z.len())?;
        check_len("v", problem.p(), self.v.len())
    }
}

/// Diagnostics for outer iterate `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `V_{rho,beta}(w^k, u^k, z^k, v^{k-1})`.
    pub lyapunov_beta: f64,
    /// `lyapunov_beta + eta * epsilon_k^2`.
    pub merit: f64,
    pub step_w: f64,
    pub step_u: f64,
    pub step_z: f64,
    /// `||A w^k + b - u^k||`.
    pub feas: f64,
    pub p_residual_max: f64,
    /// Inner tolerance that produced this iterate (`epsilon_{k-1}`).
    pub epsilon_k: f64,
    pub inner_iterations: usize,
    pub zero_one_loss: usize,
    pub f_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    PStationary,
    MaxIters,
    RankDeficient,
    Diverged,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::PStationary => "PStationary",
            SolveStatus::MaxIters => "MaxIters",
            SolveStatus::RankDeficient => "RankDeficient",
            SolveStatus::Diverged => "Diverged",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub final_state: IterateState,
    pub status: SolveStatus,
    pub trace: Vec<IterationRecord>,
    /// P-stationarity residual at the final iterate with `alpha = 1/rho`.
    pub certificate: StationarityResidual,
    /// `f(w) + lambda ||u_+||_0`.
    pub objective: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Inner solves that stopped on the iteration cap.
    pub inner_max_iter_hits: usize,
}

impl SolveReport {
    pub fn zero_one_loss(&self) -> usize {
        positive_count(&self.final_state.u)
    }
}

/// `f(w) + lambda ||u_+||_0 + <z, Aw + b - u> + rho/2 ||Aw + b - u||^2 + penalty/2 ||w - v||^2`.
pub fn lyapunov_value(
    problem: &CopProblem,
    w: &DVector<f64>,
    u: &DVector<f64>,
    z: &DVector<f64>,
    v: &DVector<f64>,
    rho: f64,
    penalty: f64,
) -> f64 {
    let r = problem.constraint_residual(w, u);
    problem.composite_value(w, u) + z.dot(&r) + 0.5 * rho * r.norm_squared() + 0.5 * penalty * (w - v).norm_squared()
}

/// `z + rho * residual`.
pub fn multiplier_step(z: &DVector<f64>, rho: f64, residual: &DVector<f64>) -> DVector<f64> {
    z + residual * rho
}

/// Callbacks invoked while [`ialm_solve_observed`] runs.
pub trait SolveObserver {
    fn on_inner(&mut self, _k: usize, _inner: &InnerSolve) {}
    fn on_record(&mut self, _record: &IterationRecord) {}
    /// Called with `(w^k, u^k, z^k, v^k)` after outer iteration `k`.
    fn on_state(&mut self, _k: usize, _state: &IterateState) {}
}

impl<F: FnMut(&IterationRecord)> SolveObserver for F {
    fn on_record(&mut self, record: &IterationRecord) {
        self(record)
    }
}

struct NoObserver;
impl SolveObserver for NoObserver {}

pub fn ialm_solve(problem: &CopProblem, init: &IterateState, outer: &OuterConfig, inner: &InnerConfig) -> Result<SolveReport> {
    ialm_solve_observed(problem, init, outer, inner, &mut NoObserver)
}

/// Outer loop. Stops when the P-stationarity residual (with `alpha = 1/rho`)
/// is at most `tol_outer` and feasibility at most `tol_feas`, checked before
/// every iteration including the first.
pub fn ialm_solve_observed(
    problem: &CopProblem,
    init: &IterateState,
    outer: &OuterConfig,
    inner: &InnerConfig,
    observer: &mut dyn SolveObserver,
) -> Result<SolveReport> {
    outer.validate()?;
    inner.validate()?;
    init.check(problem)?;
    let (mu, rho, alpha) = (outer.mu, outer.rho, outer.alpha);

    let mut state = init.clone();
    let mut epsilon = outer.epsilon0;
    let mut trace = Vec::new();
    let mut inner_total = 0;
    let mut inner_cap_hits = 0;
    let mut status = SolveStatus::MaxIters;
    let mut k = 0;
    loop {
        let cert = p_residual(problem, &state.w, &state.u, &state.z, alpha)?;
        if cert.max_residual <= outer.tol_outer && cert.r_feas <= outer.tol_feas {
            status = SolveStatus::PStationary;
            break;
        }
        if k == outer.max_outer {
            if outer.rank_deficient {
                status = SolveStatus::RankDeficient;
            }
            break;
        }

        let sub = match balm_solve(problem, &state.w, &state.u, &state.z, &state.v, mu, rho, epsilon, inner) {
            Ok(sub) => sub,
            Err(Error::Diverged { iteration }) => {
                warn!("inner solver diverged at outer iteration {k}, inner iteration {iteration}");
                status = SolveStatus::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        observer.on_inner(k, &sub);
        inner_total += sub.iterations;
        if sub.terminated_by == InnerTermination::MaxIters {
            inner_cap_hits += 1;
        }

        let residual = problem.constraint_residual(&sub.w, &sub.u);
        let z_next = multiplier_step(&state.z, rho, &residual);
        let v_prev = std::mem::replace(&mut state.v, sub.w.clone());
        let lyapunov_beta = lyapunov_value(problem, &sub.w, &sub.u, &z_next, &v_prev, rho, outer.beta);
        let merit = lyapunov_beta + outer.eta * epsilon * epsilon;
        let p_max = p_residual(problem, &sub.w, &sub.u, &z_next, alpha)?.max_residual;
        let feas = residual.norm();
        let record = IterationRecord {
            k: k + 1,
            lyapunov_beta,
            merit,
            step_w: (&sub.w - &state.w).norm(),
            step_u: (&sub.u - &state.u).norm(),
            // z_next - z = rho * residual; recorded from the identity so the
            // two fields agree bit for bit.
            step_z: rho * feas,
            feas,
            p_residual_max: p_max,
            epsilon_k: epsilon,
            inner_iterations: sub.iterations,
            zero_one_loss: positive_count(&sub.u),
            f_value: problem.objective().value(&sub.w),
        };
        debug!(
            "k={} merit={:e} feas={:e} p_res={:e} inner={}",
            record.k, record.merit, record.feas, record.p_residual_max, record.inner_iterations
        );
        observer.on_record(&record);
        trace.push(record);

        state.w = sub.w;
        state.u = sub.u;
        state.z = z_next;
        k += 1;
        observer.on_state(k, &state);
        epsilon *= outer.epsilon_ratio;
        if !merit.is_finite() {
            status = SolveStatus::Diverged;
            break;
        }
    }

    let certificate = p_residual(problem, &state.w, &state.u, &state.z, alpha)?;
    let objective = problem.composite_value(&state.w, &state.u);
    Ok(SolveReport {
        final_state: state,
        status,
        trace,
        certificate,
        objective,
        outer_iterations: k,
        inner_iterations: inner_total,
        inner_max_iter_hits: inner_cap_hits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentCheck {
    pub holds: bool,
    /// Largest `tau ||dw||^2 - (merit_k - merit_{k+1})` over the trace, floored at 0.
    pub worst_violation: f64,
    pub first_violation_k: Option<usize>,
    /// Final `step_w`, `step_u` and `step_z` are all at most the vanishing tolerance.
    pub steps_vanished: bool,
}

/// Checks `(merit_k - merit_{k+1}) >= tau ||w^{k+1} - w^k||^2 - slack` on
/// consecutive records, recomputing each merit as
/// `lyapunov_beta + eta * epsilon_k^2`.
pub fn verify_descent_trace(
    trace: &[IterationRecord],
    tau: f64,
    eta: f64,
    slack: f64,
    vanishing_tol: f64,
) -> Result<DescentCheck> {
    if trace.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "descent check needs at least 2 records, got {}",
            trace.len()
        )));
    }
    let merit = |r: &IterationRecord| r.lyapunov_beta + eta * r.epsilon_k * r.epsilon_k;
    let mut worst = 0.0_f64;
    let mut first = None;
    for pair in trace.windows(2) {
        let required = tau * pair[1].step_w * pair[1].step_w;
        let violation = required - (merit(&pair[0]) - merit(&pair[1]));
        if violation > slack && first.is_none() {
            first = Some(pair[0].k);
        }
        if violation.is_nan() && first.is_none() {
            first = Some(pair[0].k);
        }
        worst = worst.max(violation);
    }
    let last = trace.last().expect("nonempty");
    Ok(DescentCheck {
        holds: first.is_none(),
        worst_violation: worst,
        first_violation_k: first,
        steps_vanished: last.step_w <= vanishing_tol && last.step_u <= vanishing_tol && last.step_z <= vanishing_tol,
    })
}

/// `epsilon_0 = scale * (1 + ||grad f(w0)||)`.
pub fn default_epsilon0(problem: &CopProblem, w0: &DVector<f64>, scale: f64) -> f64 {
    scale * (1.0 + problem.objective().gradient(w0).norm())
}

/// Settings for the one-call [`solve`] entry point.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub mu: f64,
    /// Multiplier on the lower bound of `rho`; must exceed 1.
    pub safety: f64,
    /// Multiplier on the lower bound of the inner `t`; at least 1.
    pub inner_safety: f64,
    pub variant: Variant,
    pub mode: Mode,
    pub rho: Option<f64>,
    pub eta: Option<f64>,
    /// Scale of the default `epsilon_0`; ignored when `epsilon0` is set.
    pub epsilon0_scale: f64,
    pub epsilon0: Option<f64>,
    pub t: Option<f64>,
    pub tol_outer: f64,
    pub tol_feas: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub strict_rank: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            mu: 1.0,
            safety: 1.01,
            inner_safety: 1.01,
            variant: Variant::CaseI,
            mode: Mode::Certified,
            rho: None,
            eta: None,
            epsilon0_scale: 1.0,
            epsilon0: None,
            t: None,
            tol_outer: 1e-6,
            tol_feas: 1e-6,
            max_outer: 500,
            max_inner: 10_000,
            strict_rank: false,
        }
    }
}

/// Configurations and starting point assembled from [`SolveOptions`].
#[derive(Debug, Clone)]
pub struct SolverSetup {
    pub spectral: SpectralInfo,
    pub outer: OuterConfig,
    pub inner: InnerConfig,
    pub init: IterateState,
}

/// Derives parameters for `problem`. In certified mode any `rho`/`eta`
/// override that violates the descent conditions is rejected.
pub fn prepare(problem: &CopProblem, opts: &SolveOptions) -> Result<SolverSetup> {
    let spectral = spectral_info_default(problem.a());
    if problem.n() > problem.p() {
        warn!(
            "A has more rows ({}) than columns ({}); it cannot be full row rank",
            problem.n(),
            problem.p()
        );
    }
    let l_f = problem.objective().lipschitz();
    let sigma_f = problem.objective().strong_convexity();
    let init = IterateState::initial(problem);
    let epsilon0 = opts
        .epsilon0
        .unwrap_or_else(|| default_epsilon0(problem, &init.w, opts.epsilon0_scale));
    let mut outer = derive_parameters(&spectral, l_f, opts.mu, opts.safety, epsilon0, opts.strict_rank)?
        .with_overrides(&spectral, l_f, opts.rho, opts.eta);
    outer.tol_outer = opts.tol_outer;
    outer.tol_feas = opts.tol_feas;
    outer.max_outer = opts.max_outer;
    if opts.mode == Mode::Practical {
        outer.mode = Mode::Practical;
    }
    if outer.mode == Mode::Certified {
        let issues = outer.certification_issues(&spectral, l_f);
        if !issues.is_empty() {
            return Err(Error::Validation(issues.join("; ")));
        }
    }
    outer.validate()?;

    if opts.variant == Variant::CaseII && problem.objective().quadratic_form().is_none() {
        return Err(Error::UnsupportedVariant("Case II needs a quadratic objective".into()));
    }
    let mut inner = default_inner_config(opts.variant, &spectral, outer.mu, outer.rho, l_f, sigma_f, opts.inner_safety)
        .with_max_inner_iters(opts.max_inner);
    if let Some(t) = opts.t {
        inner = inner.with_t(t);
    }
    inner.validate()?;
    Ok(SolverSetup {
        spectral,
        outer,
        inner,
        init,
    })
}

/// Derives parameters and runs the outer loop from the default start.
pub fn solve(problem: &CopProblem, opts: &SolveOptions) -> Result<SolveReport> {
    let setup = prepare(problem, opts)?;
    ialm_solve(problem, &setup.init, &setup.outer, &setup.inner)
}

/// [`solve`] with an observer.
pub fn solve_observed(problem: &CopProblem, opts: &SolveOptions, observer: &mut dyn SolveObserver) -> Result<SolveReport> {
    let setup = prepare(problem, opts)?;
    ialm_solve_observed(problem, &setup.init, &setup.outer, &setup.inner, observer)
}
