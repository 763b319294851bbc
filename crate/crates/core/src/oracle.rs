//! Brute-force references used to cross-check the solver: a grid search for
//! the scalar zero-one prox, exhaustive enumeration of P-stationary triplets on
//! small strongly convex quadratic instances, and an empirical check of the
//! strong-convexity constant of the smooth part of the Lyapunov function.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problem::{positive_count, spectral_info_default, CopProblem};
use crate::zeroone::{p_residual, StationarityResidual};

/// Largest number of constraints accepted by [`enumerate_stationary`].
pub const MAX_ENUMERATION_ROWS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProxOracle {
    pub argmin_set: Vec<f64>,
    pub min_value: f64,
}

/// Minimizes `lambda [t > 0] + (t - center)^2 / (2 alpha)` over a uniform grid
/// covering `center +- (3 sqrt(2 lambda alpha) + 1)` plus the exact points
/// `{0, center}`. Every point within `1e-12` of the minimum is returned.
/// `grid_step` is clamped to at most `1e-3`.
pub fn prox_oracle(center: f64, lambda: f64, alpha: f64, grid_step: f64) -> ProxOracle {
    let step = grid_step.min(1e-3);
    let g = |t: f64| if t > 0.0 { lambda } else { 0.0 } + (t - center) * (t - center) / (2.0 * alpha);
    let half = 3.0 * (2.0 * lambda * alpha).sqrt() + 1.0;
    let lo = center - half;
    let count = (2.0 * half / step).ceil() as usize;

    let mut best = f64::INFINITY;
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut consider = |t: f64| {
        let v = g(t);
        if v < best - 1e-12 {
            best = v;
            points.retain(|&(_, pv)| pv <= best + 1e-12);
        }
        if v <= best + 1e-12 {
            points.push((t, v));
        }
    };
    consider(0.0);
    consider(center);
    for i in 0..=count {
        consider(lo + i as f64 * step);
    }
    let mut argmin_set: Vec<f64> = points
        .into_iter()
        .filter(|&(_, v)| v <= best + 1e-12)
        .map(|(t, _)| t)
        .collect();
    argmin_set.sort_by(f64::total_cmp);
    argmin_set.dedup();
    ProxOracle {
        argmin_set,
        min_value: best,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryCandidate {
    pub w: DVector<f64>,
    pub u: DVector<f64>,
    pub z: DVector<f64>,
    /// Constraint set `S`: rows forced to `(Aw + b)_i <= 0`.
    pub sign_pattern: Vec<usize>,
    /// `f(w) + lambda ||u_+||_0`.
    pub objective: f64,
    pub residual: StationarityResidual,
}

/// Precomputed quantities for the equality-constrained KKT solves:
/// `w0 = -H^{-1} c`, `M = H^{-1} A^T`, `G = A H^{-1} A^T`, `r0 = A w0 + b`.
struct KktSystem<'a> {
    problem: &'a CopProblem,
    w0: DVector<f64>,
    m: DMatrix<f64>,
    g: DMatrix<f64>,
    r0: DVector<f64>,
    tol: f64,
}

impl<'a> KktSystem<'a> {
    fn new(problem: &'a CopProblem) -> Result<Self> {
        let q = problem
            .objective()
            .quadratic_form()
            .ok_or_else(|| Error::UnsupportedVariant("the oracle needs a quadratic objective".into()))?;
        let chol = Cholesky::new(q.h.clone())
            .ok_or_else(|| Error::InvalidObjective("the oracle needs a positive definite H".into()))?;
        let spectral = spectral_info_default(problem.a());
        if !spectral.full_row_rank {
            return Err(Error::RankDeficient { gamma: spectral.gamma });
        }
        let a = problem.a();
        let w0 = -chol.solve(&q.c);
        let m = chol.solve(&a.transpose());
        let g = a * &m;
        let r0 = a * &w0 + problem.b();
        let scale = 1.0 + r0.amax() + problem.b().amax();
        Ok(Self {
            problem,
            w0,
            m,
            g,
            r0,
            tol: 1e-10 * scale,
        })
    }

    /// Solves `min f(w)` s.t. `(Aw + b)_E = 0` and returns `(w, multipliers on E)`.
    fn equality_solve(&self, active: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
        if active.is_empty() {
            return Some((self.w0.clone(), DVector::zeros(0)));
        }
        let k = active.len();
        let g_ee = DMatrix::from_fn(k, k, |i, j| self.g[(active[i], active[j])]);
        let rhs = DVector::from_fn(k, |i, _| self.r0[active[i]]);
        let nu = Cholesky::<f64, Dyn>::new(g_ee)?.solve(&rhs);
        let mut w = self.w0.clone();
        for (idx, &i) in active.iter().enumerate() {
            w.axpy(-nu[idx], &self.m.column(i), 1.0);
        }
        Some((w, nu))
    }

    /// Solution of `min f(w)` s.t. `(Aw + b)_S <= 0`, found by enumerating
    /// active sets `E ⊆ S`; returns `(w, u, z)` with `u_E = 0` exactly and `z`
    /// the KKT multipliers embedded in `R^n`.
    fn pattern_solve(&self, pattern: &[usize]) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let n = self.problem.n();
        for mask in 0u32..(1u32 << pattern.len()) {
            let active: Vec<usize> = pattern
                .iter()
                .enumerate()
                .filter(|(bit, _)| mask & (1 << bit) != 0)
                .map(|(_, &i)| i)
                .collect();
            let Some((w, nu)) = self.equality_solve(&active) else {
                continue;
            };
            if nu.iter().any(|&x| x < -self.tol) {
                continue;
            }
            let mut u = self.problem.affine(&w);
            if pattern.iter().any(|&i| !active.contains(&i) && u[i] > self.tol) {
                continue;
            }
            let mut z = DVector::zeros(n);
            for (idx, &i) in active.iter().enumerate() {
                u[i] = 0.0;
                z[i] = nu[idx].max(0.0);
            }
            return Some((w, u, z));
        }
        None
    }
}

fn candidate(problem: &CopProblem, pattern: Vec<usize>, w: DVector<f64>, u: DVector<f64>, z: DVector<f64>, alpha: f64) -> Result<StationaryCandidate> {
    let residual = p_residual(problem, &w, &u, &z, alpha)?;
    let objective = problem.objective().value(&w) + problem.lambda() * positive_count(&u) as f64;
    Ok(StationaryCandidate {
        w,
        u,
        z,
        sign_pattern: pattern,
        objective,
        residual,
    })
}

/// Solves the convex program `min f(w)` s.t. `(Aw + b)_S <= 0` for one
/// pattern `S` and returns the resulting triplet, whether or not it is
/// P-stationary. Works for any `n`; `None` when the program is infeasible.
pub fn solve_pattern(problem: &CopProblem, pattern: &[usize], alpha: f64) -> Result<Option<StationaryCandidate>> {
    if let Some(&bad) = pattern.iter().find(|&&i| i >= problem.n()) {
        return Err(Error::InvalidInput(format!("pattern index {bad} out of range")));
    }
    let kkt = KktSystem::new(problem)?;
    match kkt.pattern_solve(pattern) {
        Some((w, u, z)) => Ok(Some(candidate(problem, pattern.to_vec(), w, u, z, alpha)?)),
        None => Ok(None),
    }
}

/// All P-stationary triplets of a strongly convex quadratic instance with
/// full-row-rank `A` and at most [`MAX_ENUMERATION_ROWS`] rows, sorted by
/// objective then pattern, deduplicated in `w` at distance `1e-8`.
pub fn enumerate_stationary(problem: &CopProblem, alpha: f64, tol: f64) -> Result<Vec<StationaryCandidate>> {
    let n = problem.n();
    if n > MAX_ENUMERATION_ROWS {
        return Err(Error::InvalidInput(format!(
            "enumeration is limited to {MAX_ENUMERATION_ROWS} rows, got {n}"
        )));
    }
    if !(alpha > 0.0 && tol > 0.0) {
        return Err(Error::InvalidInput("alpha and tol must be positive".into()));
    }
    let kkt = KktSystem::new(problem)?;
    let mut found = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let pattern: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if let Some((w, u, z)) = kkt.pattern_solve(&pattern) {
            let c = candidate(problem, pattern, w, u, z, alpha)?;
            if c.residual.max_residual <= tol {
                found.push(c);
            }
        }
    }
    found.sort_by(|a, b| a.objective.total_cmp(&b.objective).then_with(|| a.sign_pattern.cmp(&b.sign_pattern)));
    let mut unique: Vec<StationaryCandidate> = Vec::new();
    for c in found {
        if unique.iter().all(|k| (&k.w - &c.w).norm() > 1e-8) {
            unique.push(c);
        }
    }
    Ok(unique)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaCheck {
    pub sigma: f64,
    pub holds: bool,
    /// Largest observed shortfall of the strong-convexity inequality.
    pub worst_violation: f64,
}

/// `sigma_f rho mu / (sigma_f (mu + rho) + rho mu ||A||^2 + 2 rho mu)`.
pub fn sigma_constant(sigma_f: f64, rho: f64, mu: f64, norm_a: f64) -> f64 {
    sigma_f * rho * mu / (sigma_f * (mu + rho) + rho * mu * norm_a * norm_a + 2.0 * rho * mu)
}

/// Checks the strong-convexity inequality for
/// `h(w, u, v) = sigma_f/2 ||w||^2 + mu/2 ||w - v||^2 + <z, Aw + b - u> + rho/2 ||Aw + b - u||^2`
/// with random `A` (scaled to spectral norm `norm_a`), `b` and `z`, on
/// `trials` random point pairs.
pub fn verify_sigma_constant(sigma_f: f64, rho: f64, mu: f64, norm_a: f64, trials: usize, seed: u64) -> SigmaCheck {
    let sigma = sigma_constant(sigma_f, rho, mu, norm_a);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = (3, 4);
    let mut a = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let current = a.clone().svd(false, false).singular_values.max();
    a *= norm_a / current;
    let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let zt = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));

    let h = |w: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>| {
        let r = &a * w + &b - u;
        0.5 * sigma_f * w.norm_squared() + 0.5 * mu * (w - v).norm_squared() + zt.dot(&r) + 0.5 * rho * r.norm_squared()
    };
    let grad = |w: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>| {
        let r = &a * w + &b - u;
        let m = &zt + &r * rho;
        let gw = w * sigma_f + (w - v) * mu + a.tr_mul(&m);
        let gu = -m;
        let gv = (v - w) * mu;
        (gw, gu, gv)
    };

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let mut draw = |len: usize| DVector::from_fn(len, |_, _| rng.random_range(-3.0..3.0));
        let (w, u, v) = (draw(p), draw(n), draw(p));
        let (wb, ub, vb) = (draw(p), draw(n), draw(p));
        let (gw, gu, gv) = grad(&wb, &ub, &vb);
        let (dw, du, dv) = (&w - &wb, &u - &ub, &v - &vb);
        let lhs = h(&w, &u, &v) - h(&wb, &ub, &vb);
        let rhs = gw.dot(&dw) + gu.dot(&du) + gv.dot(&dv)
            + 0.5 * sigma * (dw.norm_squared() + du.norm_squared() + dv.norm_squared());
        worst = worst.max(rhs - lhs);
    }
    SigmaCheck {
        sigma,
        holds: worst <= 1e-8,
        worst_violation: worst.max(0.0),
    }
}
