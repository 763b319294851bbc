//! Proximal operator and limiting subdifferential of `lambda ||(.)_+||_0`, plus
//! the stationarity residuals built on them.
//!
//! For a scalar center `c` and threshold `r = sqrt(2 lambda alpha)` the
//! proximal map is
//!
//! ```text
//! prox(c) = 0        if 0 < c < r
//!           {0, c}   if c == 0 or c == r
//!           c        otherwise
//! ```
//!
//! The set-valued boundary case always selects 0 as the canonical point.

use std::fmt;

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::problem::CopProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    PassThrough,
    Zero,
    Tie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub canonical: DVector<f64>,
    pub branch: Vec<Branch>,
    /// Non-selected member of the proximal set for `Tie` components.
    pub tie_alternative: Vec<Option<f64>>,
}

/// `sqrt(2 lambda alpha)`.
pub fn prox_threshold(lambda: f64, alpha: f64) -> f64 {
    (2.0 * lambda * alpha).sqrt()
}

#[inline]
pub(crate) fn prox_component(center: f64, threshold: f64) -> (f64, Branch) {
    if center == 0.0 || center == threshold {
        (0.0, Branch::Tie)
    } else if center > 0.0 && center < threshold {
        (0.0, Branch::Zero)
    } else {
        (center, Branch::PassThrough)
    }
}

fn check_params(lambda: f64, alpha: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

fn check_finite(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite components")))
    }
}

/// Componentwise proximal operator of `lambda ||(.)_+||_0` with parameter `alpha`.
pub fn prox_zero_one(center: &DVector<f64>, lambda: f64, alpha: f64) -> Result<ProxResult> {
    check_params(lambda, alpha)?;
    check_finite(center, "prox center")?;
    let r = prox_threshold(lambda, alpha);
    let n = center.len();
    let mut canonical = DVector::zeros(n);
    let mut branch = Vec::with_capacity(n);
    let mut tie_alternative = Vec::with_capacity(n);
    for (i, &c) in center.iter().enumerate() {
        let (v, br) = prox_component(c, r);
        canonical[i] = v;
        branch.push(br);
        tie_alternative.push((br == Branch::Tie).then_some(c));
    }
    Ok(ProxResult {
        canonical,
        branch,
        tie_alternative,
    })
}

/// Euclidean distance from `u` to the (possibly set-valued) proximal set of `center`.
pub fn prox_distance(u: &DVector<f64>, center: &DVector<f64>, lambda: f64, alpha: f64) -> Result<f64> {
    check_params(lambda, alpha)?;
    check_len("prox_distance u vs center", center.len(), u.len())?;
    check_finite(center, "prox center")?;
    check_finite(u, "u")?;
    Ok(prox_distance_unchecked(u, center, prox_threshold(lambda, alpha)))
}

pub(crate) fn prox_distance_unchecked(u: &DVector<f64>, center: &DVector<f64>, threshold: f64) -> f64 {
    let mut acc = 0.0;
    for (&ui, &c) in u.iter().zip(center.iter()) {
        let (v, br) = prox_component(c, threshold);
        let d = match br {
            Branch::Tie => ui.abs().min((ui - c).abs()),
            _ => (ui - v).abs(),
        };
        acc += d * d;
    }
    acc.sqrt()
}

/// Membership `z in partial ||u_+||_0`: `z_i = 0` where `u_i != 0` and
/// `z_i >= 0` where `u_i = 0`.
pub fn subdifferential_member(z: &DVector<f64>, u: &DVector<f64>) -> bool {
    assert_eq!(z.len(), u.len(), "subdifferential_member: dimension mismatch");
    z.iter()
        .zip(u.iter())
        .all(|(&zi, &ui)| if ui != 0.0 { zi == 0.0 } else { zi >= 0.0 })
}

/// A step-size threshold that may be `+inf`. Comparisons against it are exact.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Threshold {
    Finite(f64),
    Infinite,
}

impl Threshold {
    pub fn is_finite(self) -> bool {
        matches!(self, Threshold::Finite(_))
    }

    pub fn min(self, other: Threshold) -> Threshold {
        match (self, other) {
            (Threshold::Finite(a), Threshold::Finite(b)) => Threshold::Finite(a.min(b)),
            (Threshold::Finite(a), Threshold::Infinite) | (Threshold::Infinite, Threshold::Finite(a)) => {
                Threshold::Finite(a)
            }
            (Threshold::Infinite, Threshold::Infinite) => Threshold::Infinite,
        }
    }

    /// True when `alpha` lies strictly below the threshold.
    pub fn admits(self, alpha: f64) -> bool {
        match self {
            Threshold::Finite(t) => alpha < t,
            Threshold::Infinite => true,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Threshold::Finite(t) => Some(t),
            Threshold::Infinite => None,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(t) => write!(f, "{t}"),
            Threshold::Infinite => f.write_str("inf"),
        }
    }
}

/// Step-size thresholds below which a stationary `(u, z)` pair is a proximal
/// fixed point. The `alpha_star` fields use the same formulas for the
/// constrained problem's multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaThresholds {
    pub alpha_hat_u: Threshold,
    pub alpha_hat_z: Threshold,
    pub alpha_hat: Threshold,
    pub alpha_star_u: Threshold,
    pub alpha_star_z: Threshold,
    pub alpha_star: Threshold,
}

/// `alpha_u = min_{u_i > 0} u_i^2 / (2 lambda)`, `alpha_z = min_{z_i > 0} 2 lambda / z_i^2`.
pub fn alpha_thresholds(u: &DVector<f64>, z: &DVector<f64>, lambda: f64) -> AlphaThresholds {
    let over_positive = |v: &DVector<f64>, term: &dyn Fn(f64) -> f64| {
        v.iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| Threshold::Finite(term(x)))
            .fold(Threshold::Infinite, Threshold::min)
    };
    let alpha_u = over_positive(u, &|x| x * x / (2.0 * lambda));
    let alpha_z = over_positive(z, &|x| 2.0 * lambda / (x * x));
    let alpha = alpha_u.min(alpha_z);
    AlphaThresholds {
        alpha_hat_u: alpha_u,
        alpha_hat_z: alpha_z,
        alpha_hat: alpha,
        alpha_star_u: alpha_u,
        alpha_star_z: alpha_z,
        alpha_star: alpha,
    }
}

/// Residuals of the P-stationarity system (`r_multiplier = r_lyapunov_var = 0`)
/// or of the fixed-multiplier system (`r_feas = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StationarityResidual {
    pub r_grad: f64,
    pub r_prox: f64,
    pub r_feas: f64,
    pub r_multiplier: f64,
    pub r_lyapunov_var: f64,
    pub max_residual: f64,
}

impl StationarityResidual {
    fn assemble(r_grad: f64, r_prox: f64, r_feas: f64, r_multiplier: f64, r_lyapunov_var: f64) -> Self {
        let max_residual = r_grad.max(r_prox).max(r_feas).max(r_multiplier).max(r_lyapunov_var);
        Self {
            r_grad,
            r_prox,
            r_feas,
            r_multiplier,
            r_lyapunov_var,
            max_residual,
        }
    }
}

/// Residual of the P-stationarity system
/// `grad f(w) + A'z = 0`, `u in Prox(u + alpha z)`, `Aw + b = u`.
pub fn p_residual(
    problem: &CopProblem,
    w: &DVector<f64>,
    u: &DVector<f64>,
    z: &DVector<f64>,
    alpha: f64,
) -> Result<StationarityResidual> {
    problem.check_primal(w, u)?;
    check_len("z", problem.n(), z.len())?;
    let grad = problem.objective().gradient(w) + problem.a().tr_mul(z);
    let feas = problem.constraint_residual(w, u);
    let center = u + z * alpha;
    let r_prox = prox_distance(u, &center, problem.lambda(), alpha)?;
    Ok(StationarityResidual::assemble(grad.norm(), r_prox, feas.norm(), 0.0, 0.0))
}

/// Residual of the stationarity system for the Lyapunov function with the
/// multiplier fixed at `z_tilde`:
/// `grad f(w) + mu (w - v) + A'z = 0`, `u in Prox(u + alpha z)`,
/// `z = z_tilde + rho (Aw + b - u)`, `v = w`.
#[allow(clippy::too_many_arguments)]
pub fn p_tilde_residual(
    problem: &CopProblem,
    w: &DVector<f64>,
    u: &DVector<f64>,
    z: &DVector<f64>,
    v: &DVector<f64>,
    z_tilde: &DVector<f64>,
    mu: f64,
    rho: f64,
    alpha: f64,
) -> Result<StationarityResidual> {
    problem.check_primal(w, u)?;
    check_len("z", problem.n(), z.len())?;
    check_len("z_tilde", problem.n(), z_tilde.len())?;
    check_len("v", problem.p(), v.len())?;
    if !(mu > 0.0 && rho > 0.0) {
        return Err(Error::InvalidInput(format!("mu and rho must be positive, got {mu}, {rho}")));
    }
    let grad = problem.objective().gradient(w) + (w - v) * mu + problem.a().tr_mul(z);
    let mult = z - z_tilde - problem.constraint_residual(w, u) * rho;
    let center = u + z * alpha;
    let r_prox = prox_distance(u, &center, problem.lambda(), alpha)?;
    Ok(StationarityResidual::assemble(
        grad.norm(),
        r_prox,
        0.0,
        mult.norm(),
        (v - w).norm(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactPenaltyCheck {
    pub is_p_stationary: bool,
    pub is_p_tilde_stationary_at_z: bool,
    /// P-tilde stationarity at `z_tilde = z` together with feasibility, which
    /// is the condition under which the multiplier is reproduced exactly and
    /// the point maps back to a P-stationary triplet.
    pub strongly_exact_back_map: bool,
}

/// Checks the exact-penalty correspondence at `(w, u, z)`: P-stationarity of
/// the constrained problem versus stationarity of the Lyapunov function with
/// `z_tilde = z` and `v = w`.
#[allow(clippy::too_many_arguments)]
pub fn verify_exact_penalty(
    problem: &CopProblem,
    w: &DVector<f64>,
    u: &DVector<f64>,
    z: &DVector<f64>,
    mu: f64,
    rho: f64,
    alpha: f64,
    tol: f64,
) -> Result<ExactPenaltyCheck> {
    let p = p_residual(problem, w, u, z, alpha)?;
    let pt = p_tilde_residual(problem, w, u, z, w, z, mu, rho, alpha)?;
    let is_p_stationary = p.max_residual <= tol;
    let is_p_tilde_stationary_at_z = pt.max_residual <= tol;
    Ok(ExactPenaltyCheck {
        is_p_stationary,
        is_p_tilde_stationary_at_z,
        strongly_exact_back_map: is_p_tilde_stationary_at_z && p.r_feas <= tol,
    })
}
