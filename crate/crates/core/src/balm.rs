//! Bregman alternating linearized minimization for the augmented Lagrangian
//! subproblem
//!
//! ```text
//! min_{w,u}  V(w, u, z_k, v_k) = h_k(w, u) + lambda ||u_+||_0
//! h_k(w, u)  = f(w) + mu/2 ||w - v_k||^2 + <z_k, Aw + b - u> + rho/2 ||Aw + b - u||^2
//! ```
//!
//! with the proximal step size fixed at `alpha = 1/rho`. Each iteration takes an
//! exact proximal `u`-step on the shifted point `s = A w + b + z_k / rho` and
//! then a linearized `w`-step. Two choices of the Bregman kernel are offered:
//!
//! * [`Variant::CaseI`] linearizes both `f` and `rho A'A`, giving an explicit
//!   update that only touches the rows zeroed by the `u`-step.
//! * [`Variant::CaseII`] keeps the quadratic `f` exact and only cancels the rows
//!   that pass through the `u`-step, which requires one SPD solve per step.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::ialm::lyapunov_value;
use crate::problem::{CopProblem, SpectralInfo};
use crate::zeroone::{prox_component, prox_distance_unchecked, prox_threshold, Branch};

/// Lower bound applied to the step coefficient `t` by [`default_inner_config`].
pub const T_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    CaseI,
    CaseII,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    pub variant: Variant,
    /// Bregman coefficient.
    pub t: f64,
    /// Bound on the norm of the Bregman matrix `Q`.
    pub q: f64,
    /// Lipschitz constant of the linearized part `g`.
    pub l_g: f64,
    /// `t - q - l_g`.
    pub zeta: f64,
    /// Guaranteed per-step decrease factor `kappa` in
    /// `V_j - V_{j+1} >= kappa ||w_{j+1} - w_j||^2`.
    pub descent_constant: f64,
    pub max_inner_iters: usize,
    pub descent_tolerance: f64,
    descent_offset: f64,
}

impl InnerConfig {
    /// Replaces `t`, keeping the derived constants consistent.
    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self.zeta = t - self.q - self.l_g;
        self.descent_constant = t + self.descent_offset;
        self
    }

    pub fn with_max_inner_iters(mut self, max_inner_iters: usize) -> Self {
        self.max_inner_iters = max_inner_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::Validation(format!("inner t must be finite and >= 0, got {}", self.t)));
        }
        if self.max_inner_iters == 0 {
            return Err(Error::Validation("max_inner_iters must be at least 1".into()));
        }
        if !(self.descent_tolerance >= 0.0) {
            return Err(Error::Validation("descent_tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Step coefficient `t` just above the bound that makes each inner step a
/// sufficient decrease of the Lyapunov function.
///
/// * Case I: `t > (l_f + rho ||A||^2 - mu) / 2`, decrease `(2t + mu - l_f - rho ||A||^2) / 2`.
/// * Case II: `t > (rho ||A||^2 - mu - sigma_f) / 2`, decrease `(2t + mu + sigma_f - rho ||A||^2) / 2`,
///   where `sigma_f` is the smallest eigenvalue of the quadratic's Hessian
///   (1 for `f = ||w||^2 / 2`).
pub fn default_inner_config(
    variant: Variant,
    spectral: &SpectralInfo,
    mu: f64,
    rho: f64,
    l_f: f64,
    sigma_f: f64,
    safety: f64,
) -> InnerConfig {
    assert!(safety >= 1.0, "safety factor must be >= 1");
    let q = rho * spectral.norm_a * spectral.norm_a;
    let (bound, l_g, descent_offset) = match variant {
        Variant::CaseI => ((l_f + q - mu) / 2.0, l_f, (mu - l_f - q) / 2.0),
        Variant::CaseII => ((q - mu - sigma_f) / 2.0, 0.0, (mu + sigma_f - q) / 2.0),
    };
    let t = safety * bound.max(T_FLOOR);
    InnerConfig {
        variant,
        t,
        q,
        l_g,
        zeta: t - q - l_g,
        descent_constant: t + descent_offset,
        max_inner_iters: 10_000,
        descent_tolerance: 1e-10,
        descent_offset,
    }
}

/// Result of the proximal `u`-step.
#[derive(Debug, Clone, PartialEq)]
pub struct UStep {
    pub u_next: DVector<f64>,
    /// `{i : 0 < s_i < sqrt(2 lambda / rho)}`.
    pub t_set: Vec<usize>,
    /// Components with `s_i` exactly on the threshold; zeroed by the canonical
    /// tie-break.
    pub ties: Vec<usize>,
    /// Every component where `u_next` differs from `s` (`t_set` plus the
    /// positive ties). The `w`-step couples only through these rows.
    pub zeroed: Vec<usize>,
    /// The shifted point `s = A w + b + z_k / rho`.
    pub shifted: DVector<f64>,
}

pub(crate) fn u_step_from_shifted(shifted: DVector<f64>, lambda: f64, rho: f64) -> UStep {
    let r = prox_threshold(lambda, 1.0 / rho);
    let mut u_next = shifted.clone();
    let mut t_set = Vec::new();
    let mut ties = Vec::new();
    let mut zeroed = Vec::new();
    for (i, &s) in shifted.iter().enumerate() {
        let (v, br) = prox_component(s, r);
        u_next[i] = v;
        match br {
            Branch::Zero => t_set.push(i),
            Branch::Tie => ties.push(i),
            Branch::PassThrough => {}
        }
        if br != Branch::PassThrough && s != 0.0 {
            zeroed.push(i);
        }
    }
    UStep {
        u_next,
        t_set,
        ties,
        zeroed,
        shifted,
    }
}

/// `u`-step at `alpha = 1/rho`: the canonical proximal point of `A w + b + z_k / rho`.
pub fn u_step(problem: &CopProblem, w: &DVector<f64>, z_k: &DVector<f64>, rho: f64) -> Result<UStep> {
    check_len("w", problem.p(), w.len())?;
    check_len("z_k", problem.n(), z_k.len())?;
    let shifted = problem.affine(w) + z_k / rho;
    Ok(u_step_from_shifted(shifted, problem.lambda(), rho))
}

/// `sum_{i in rows} coef_i * A_i'`, costing `O(|rows| p)`.
fn rows_combination(a: &DMatrix<f64>, rows: &[usize], coef: impl Fn(usize) -> f64) -> DVector<f64> {
    let mut out = DVector::zeros(a.ncols());
    for &i in rows {
        let ci = coef(i);
        for (j, o) in out.iter_mut().enumerate() {
            *o += ci * a[(i, j)];
        }
    }
    out
}

/// Case I `w`-step:
/// `w+ = (mu v_k + t w_prev - grad f(w_prev) - rho A_T' s_T) / (mu + t)`.
#[allow(clippy::too_many_arguments)]
pub fn w_step_case1(
    problem: &CopProblem,
    w_prev: &DVector<f64>,
    v_k: &DVector<f64>,
    zeroed: &[usize],
    shifted: &DVector<f64>,
    mu: f64,
    rho: f64,
    t: f64,
) -> DVector<f64> {
    let coupling = rows_combination(problem.a(), zeroed, |i| rho * shifted[i]);
    let grad = problem.objective().gradient(w_prev);
    (v_k * mu + w_prev * t - grad - coupling) / (mu + t)
}

/// Solver for the Case II system
/// `(H + (t + mu) I + rho A_T' A_T) w = rhs`.
///
/// The factor of `H + (t + mu) I` is reused across steps; small index sets go
/// through a Woodbury correction in `|T|`-space.
pub struct CaseIISolver {
    base: DMatrix<f64>,
    base_factor: Cholesky<f64, Dyn>,
    c: DVector<f64>,
}

impl CaseIISolver {
    pub fn new(problem: &CopProblem, mu: f64, t: f64) -> Result<Self> {
        let q = problem.objective().quadratic_form().ok_or_else(|| {
            Error::UnsupportedVariant("Case II w-step needs a quadratic objective".into())
        })?;
        let p = problem.p();
        let base = &q.h + DMatrix::identity(p, p) * (t + mu);
        let base_factor = Cholesky::new(base.clone()).ok_or_else(|| {
            Error::SingularSystem("H + (t + mu) I is not positive definite".into())
        })?;
        Ok(Self {
            base,
            base_factor,
            c: q.c.clone(),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn right_hand_side(
        &self,
        problem: &CopProblem,
        w_prev: &DVector<f64>,
        v_k: &DVector<f64>,
        z_k: &DVector<f64>,
        zeroed: &[usize],
        mu: f64,
        rho: f64,
        t: f64,
    ) -> DVector<f64> {
        let b = problem.b();
        let coupling = rows_combination(problem.a(), zeroed, |i| rho * b[i] + z_k[i]);
        v_k * mu + w_prev * t - &self.c - coupling
    }

    /// Dense factorization of the full system matrix.
    pub fn solve_direct(&self, a: &DMatrix<f64>, zeroed: &[usize], rho: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let mut m = self.base.clone();
        if !zeroed.is_empty() {
            let a_t = a.select_rows(zeroed);
            m += a_t.tr_mul(&a_t) * rho;
        }
        let chol = Cholesky::new(m)
            .ok_or_else(|| Error::SingularSystem("Case II system is not positive definite".into()))?;
        Ok(chol.solve(rhs))
    }

    /// `M^{-1} r = y - Y (I/rho + A_T Y)^{-1} A_T y` with `y = M0^{-1} r`, `Y = M0^{-1} A_T'`.
    pub fn solve_woodbury(&self, a: &DMatrix<f64>, zeroed: &[usize], rho: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let y = self.base_factor.solve(rhs);
        if zeroed.is_empty() {
            return Ok(y);
        }
        let a_t = a.select_rows(zeroed);
        let big_y = self.base_factor.solve(&a_t.transpose());
        let m = zeroed.len();
        let small = DMatrix::identity(m, m) / rho + &a_t * &big_y;
        let chol = Cholesky::new(small)
            .ok_or_else(|| Error::SingularSystem("Woodbury capacitance matrix is not positive definite".into()))?;
        let corr = chol.solve(&(&a_t * &y));
        Ok(y - big_y * corr)
    }

    pub fn solve(&self, a: &DMatrix<f64>, zeroed: &[usize], rho: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if 4 * zeroed.len() < a.ncols() {
            self.solve_woodbury(a, zeroed, rho, rhs)
        } else {
            self.solve_direct(a, zeroed, rho, rhs)
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        problem: &CopProblem,
        w_prev: &DVector<f64>,
        v_k: &DVector<f64>,
        z_k: &DVector<f64>,
        zeroed: &[usize],
        mu: f64,
        rho: f64,
        t: f64,
    ) -> Result<DVector<f64>> {
        let rhs = self.right_hand_side(problem, w_prev, v_k, z_k, zeroed, mu, rho, t);
        self.solve(problem.a(), zeroed, rho, &rhs)
    }
}

/// Case II `w`-step for a quadratic `f(w) = w'Hw/2 + c'w`: solves
/// `(H + (t + mu) I + rho A_T' A_T) w = mu v_k + t w_prev - c - rho A_T' (b + z_k / rho)_T`.
#[allow(clippy::too_many_arguments)]
pub fn w_step_case2(
    problem: &CopProblem,
    w_prev: &DVector<f64>,
    v_k: &DVector<f64>,
    z_k: &DVector<f64>,
    zeroed: &[usize],
    mu: f64,
    rho: f64,
    t: f64,
) -> Result<DVector<f64>> {
    CaseIISolver::new(problem, mu, t)?.step(problem, w_prev, v_k, z_k, zeroed, mu, rho, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerCheck {
    pub passed: bool,
    pub crit_grad: f64,
    pub crit_prox: f64,
    pub descent_ok: bool,
    /// `V(w, u, z_k, v_k)` with penalty `mu`.
    pub lyapunov: f64,
}

/// Inexactness test for the subproblem: Lyapunov value no larger than at the
/// outer iterate, and
/// `max(dist(u, Prox(u - grad_u h_k / rho)), ||grad_w h_k||) <= epsilon_k`.
#[allow(clippy::too_many_arguments)]
pub fn inner_stopping_check(
    problem: &CopProblem,
    w: &DVector<f64>,
    u: &DVector<f64>,
    z_k: &DVector<f64>,
    v_k: &DVector<f64>,
    mu: f64,
    rho: f64,
    epsilon_k: f64,
    lyap_prev_outer: f64,
    descent_tolerance: f64,
) -> Result<InnerCheck> {
    problem.check_primal(w, u)?;
    check_len("z_k", problem.n(), z_k.len())?;
    check_len("v_k", problem.p(), v_k.len())?;
    let alpha = 1.0 / rho;
    let residual = problem.constraint_residual(w, u);
    // rho (Aw + b - u) + z_k = -grad_u h_k
    let scaled = &residual * rho + z_k;
    let grad_w = problem.objective().gradient(w) + (w - v_k) * mu + problem.a().tr_mul(&scaled);
    let center = u + &scaled * alpha;
    let crit_prox = prox_distance_unchecked(u, &center, prox_threshold(problem.lambda(), alpha));
    let crit_grad = grad_w.norm();
    let lyapunov = lyapunov_value(problem, w, u, z_k, v_k, rho, mu);
    let descent_ok = lyapunov <= lyap_prev_outer + descent_tolerance;
    Ok(InnerCheck {
        passed: descent_ok && crit_grad.max(crit_prox) <= epsilon_k,
        crit_grad,
        crit_prox,
        descent_ok,
        lyapunov,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerTraceRow {
    pub j: usize,
    /// Lyapunov value after step `j`.
    pub lyapunov: f64,
    pub step_w: f64,
    pub step_u: f64,
    pub t_set_size: usize,
    pub crit_prox: f64,
    pub crit_grad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerTermination {
    Criteria,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct InnerSolve {
    pub w: DVector<f64>,
    pub u: DVector<f64>,
    pub iterations: usize,
    /// Lyapunov value at the starting pair.
    pub initial_lyapunov: f64,
    pub trace: Vec<InnerTraceRow>,
    pub terminated_by: InnerTermination,
    pub final_check: InnerCheck,
}

/// Runs the inner solver from `(w_start, u_start)` until the inexactness test
/// passes or `max_inner_iters` steps have been taken. At least one step is
/// always taken, so the returned pair is an iterate of the method.
#[allow(clippy::too_many_arguments)]
pub fn balm_solve(
    problem: &CopProblem,
    w_start: &DVector<f64>,
    u_start: &DVector<f64>,
    z_k: &DVector<f64>,
    v_k: &DVector<f64>,
    mu: f64,
    rho: f64,
    epsilon_k: f64,
    config: &InnerConfig,
) -> Result<InnerSolve> {
    config.validate()?;
    problem.check_primal(w_start, u_start)?;
    check_len("z_k", problem.n(), z_k.len())?;
    check_len("v_k", problem.p(), v_k.len())?;
    if !(mu > 0.0 && rho > 0.0) {
        return Err(Error::InvalidInput(format!("mu and rho must be positive, got {mu}, {rho}")));
    }

    let case2 = match config.variant {
        Variant::CaseI => None,
        Variant::CaseII => Some(CaseIISolver::new(problem, mu, config.t)?),
    };
    let initial_lyapunov = lyapunov_value(problem, w_start, u_start, z_k, v_k, rho, mu);
    if !initial_lyapunov.is_finite() {
        return Err(Error::Diverged { iteration: 0 });
    }

    let mut w = w_start.clone();
    let mut u = u_start.clone();
    let mut trace = Vec::new();
    for j in 0..config.max_inner_iters {
        let shifted = problem.affine(&w) + z_k / rho;
        let step = u_step_from_shifted(shifted, problem.lambda(), rho);
        let w_next = match &case2 {
            None => w_step_case1(problem, &w, v_k, &step.zeroed, &step.shifted, mu, rho, config.t),
            Some(solver) => solver.step(problem, &w, v_k, z_k, &step.zeroed, mu, rho, config.t)?,
        };
        let check = inner_stopping_check(
            problem,
            &w_next,
            &step.u_next,
            z_k,
            v_k,
            mu,
            rho,
            epsilon_k,
            initial_lyapunov,
            config.descent_tolerance,
        )?;
        if !check.lyapunov.is_finite() {
            return Err(Error::Diverged { iteration: j });
        }
        trace.push(InnerTraceRow {
            j,
            lyapunov: check.lyapunov,
            step_w: (&w_next - &w).norm(),
            step_u: (&step.u_next - &u).norm(),
            t_set_size: step.t_set.len(),
            crit_prox: check.crit_prox,
            crit_grad: check.crit_grad,
        });
        w = w_next;
        u = step.u_next;
        if check.passed {
            return Ok(InnerSolve {
                w,
                u,
                iterations: j + 1,
                initial_lyapunov,
                trace,
                terminated_by: InnerTermination::Criteria,
                final_check: check,
            });
        }
        if j + 1 == config.max_inner_iters {
            return Ok(InnerSolve {
                w,
                u,
                iterations: j + 1,
                initial_lyapunov,
                trace,
                terminated_by: InnerTermination::MaxIters,
                final_check: check,
            });
        }
    }
    unreachable!("max_inner_iters >= 1 is validated")
}
