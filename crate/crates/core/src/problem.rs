//! Problem representation and the spectral quantities of the coupling matrix.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_len, Error, Result};

type ValueFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// `f(w) = 0.5 w'Hw + c'w + d` with symmetric `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub h: DMatrix<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl QuadraticForm {
    pub fn value(&self, w: &DVector<f64>) -> f64 {
        0.5 * w.dot(&(&self.h * w)) + self.c.dot(w) + self.d
    }

    pub fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.h * w + &self.c
    }
}

#[derive(Clone)]
enum Kind {
    Quadratic(QuadraticForm),
    General {
        value: Arc<ValueFn>,
        gradient: Arc<GradientFn>,
    },
}

/// The smooth part `f` of the composite objective.
#[derive(Clone)]
pub struct SmoothObjective {
    kind: Kind,
    dim: usize,
    lipschitz_l_f: f64,
    strong_convexity_sigma_f: f64,
}

impl fmt::Debug for SmoothObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothObjective")
            .field("dim", &self.dim)
            .field("quadratic", &self.quadratic_form().is_some())
            .field("lipschitz_l_f", &self.lipschitz_l_f)
            .field("strong_convexity_sigma_f", &self.strong_convexity_sigma_f)
            .finish()
    }
}

impl SmoothObjective {
    /// Quadratic objective. The Lipschitz constant is the spectral norm of `H`
    /// and the strong convexity constant its smallest eigenvalue (clamped at 0).
    pub fn quadratic(h: DMatrix<f64>, c: DVector<f64>, d: f64) -> Result<Self> {
        let p = c.len();
        if h.nrows() != p || h.ncols() != p {
            return Err(Error::DimensionMismatch {
                context: "quadratic form H",
                expected: p,
                found: if h.nrows() != p { h.nrows() } else { h.ncols() },
            });
        }
        if h.iter().chain(c.iter()).any(|x| !x.is_finite()) || !d.is_finite() {
            return Err(Error::InvalidObjective(
                "quadratic form has non-finite entries".into(),
            ));
        }
        let asym = (&h - h.transpose()).amax();
        if asym > 1e-12 * (1.0 + h.amax()) {
            return Err(Error::InvalidObjective(format!(
                "H is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let (lo, hi) = if p == 0 {
            (0.0, 0.0)
        } else {
            let eig = SymmetricEigen::new(h.clone()).eigenvalues;
            (eig.min(), eig.max())
        };
        Ok(Self {
            kind: Kind::Quadratic(QuadraticForm { h, c, d }),
            dim: p,
            lipschitz_l_f: lo.abs().max(hi.abs()),
            strong_convexity_sigma_f: lo.max(0.0),
        })
    }

    /// `f(w) = 0.5 ||w||^2`.
    pub fn half_squared_norm(p: usize) -> Self {
        Self::quadratic(DMatrix::identity(p, p), DVector::zeros(p), 0.0)
            .expect("identity quadratic is valid")
    }

    /// Black-box objective. `lipschitz_l_f` must be supplied by the caller;
    /// pass `0.0` for `strong_convexity_sigma_f` when it is unknown.
    pub fn new<V, G>(
        dim: usize,
        value: V,
        gradient: G,
        lipschitz_l_f: f64,
        strong_convexity_sigma_f: f64,
    ) -> Result<Self>
    where
        V: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        if !(lipschitz_l_f.is_finite() && lipschitz_l_f >= 0.0) {
            return Err(Error::InvalidObjective(format!(
                "lipschitz constant must be finite and nonnegative, got {lipschitz_l_f}"
            )));
        }
        if !(strong_convexity_sigma_f.is_finite() && strong_convexity_sigma_f >= 0.0) {
            return Err(Error::InvalidObjective(format!(
                "strong convexity constant must be finite and nonnegative, got {strong_convexity_sigma_f}"
            )));
        }
        Ok(Self {
            kind: Kind::General {
                value: Arc::new(value),
                gradient: Arc::new(gradient),
            },
            dim,
            lipschitz_l_f,
            strong_convexity_sigma_f,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, w: &DVector<f64>) -> f64 {
        match &self.kind {
            Kind::Quadratic(q) => q.value(w),
            Kind::General { value, .. } => value(w),
        }
    }

    pub fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            Kind::Quadratic(q) => q.gradient(w),
            Kind::General { gradient, .. } => gradient(w),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz_l_f
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity_sigma_f
    }

    pub fn quadratic_form(&self) -> Option<&QuadraticForm> {
        match &self.kind {
            Kind::Quadratic(q) => Some(q),
            Kind::General { .. } => None,
        }
    }
}

/// Largest relative error between a central finite difference of `obj.value`
/// and `obj.gradient` at `w`. The error of coordinate `i` is
/// `|fd_i - g_i| / max(1, |g_i|)`.
pub fn check_gradient(obj: &SmoothObjective, w: &DVector<f64>, step: f64) -> Result<f64> {
    check_len("check_gradient point", obj.dim(), w.len())?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!("step must be positive, got {step}")));
    }
    let g = obj.gradient(w);
    check_len("objective gradient", obj.dim(), g.len())?;
    if !obj.value(w).is_finite() || g.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidObjective(
            "value or gradient is not finite at the probe point".into(),
        ));
    }
    let mut worst = 0.0_f64;
    let mut probe = w.clone();
    for i in 0..w.len() {
        probe[i] = w[i] + step;
        let plus = obj.value(&probe);
        probe[i] = w[i] - step;
        let minus = obj.value(&probe);
        probe[i] = w[i];
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::InvalidObjective(format!(
                "value is not finite near coordinate {i}"
            )));
        }
        let fd = (plus - minus) / (2.0 * step);
        worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
    }
    Ok(worst)
}

/// A zero-one composite problem `min f(w) + lambda ||(Aw + b)_+||_0`.
#[derive(Debug, Clone)]
pub struct CopProblem {
    objective: SmoothObjective,
    a: DMatrix<f64>,
    b: DVector<f64>,
    lambda: f64,
}

impl CopProblem {
    pub fn new(
        objective: SmoothObjective,
        a: DMatrix<f64>,
        b: DVector<f64>,
        lambda: f64,
    ) -> Result<Self> {
        check_len("rows of A vs length of b", a.nrows(), b.len())?;
        check_len("columns of A vs objective dimension", objective.dim(), a.ncols())?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("A or b has non-finite entries".into()));
        }
        Ok(Self {
            objective,
            a,
            b,
            lambda,
        })
    }

    pub fn objective(&self) -> &SmoothObjective {
        &self.objective
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of rows `n` of `A`.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of variables `p`.
    pub fn p(&self) -> usize {
        self.a.ncols()
    }

    /// `A w + b`.
    pub fn affine(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.a * w + &self.b
    }

    /// `A w + b - u`.
    pub fn constraint_residual(&self, w: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.affine(w) - u
    }

    /// `f(w) + lambda ||u_+||_0`.
    pub fn composite_value(&self, w: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.objective.value(w) + self.lambda * positive_count(u) as f64
    }

    pub(crate) fn check_primal(&self, w: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
        check_len("w", self.p(), w.len())?;
        check_len("u", self.n(), u.len())
    }
}

/// `||u_+||_0`: number of strictly positive components.
pub fn positive_count(u: &DVector<f64>) -> usize {
    u.iter().filter(|&&x| x > 0.0).count()
}

/// Largest singular value of `A` and the square root `gamma` of the smallest
/// eigenvalue of `A A'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralInfo {
    pub norm_a: f64,
    pub gamma: f64,
    pub full_row_rank: bool,
}

/// Relative rank tolerance used when none is given: `1e-10 * ||A||`.
pub fn default_rank_tolerance(norm_a: f64) -> f64 {
    1e-10 * norm_a
}

/// Spectral quantities of `A`. `gamma` is `sqrt(theta_min(A A'))`, which is 0
/// whenever `A` has more rows than columns. It is computed as the smallest
/// singular value of `A` rather than from the Gram matrix so that rank
/// deficiency shows up at the `eps * ||A||` level instead of `sqrt(eps)`.
pub fn spectral_info(a: &DMatrix<f64>, rank_tolerance: f64) -> SpectralInfo {
    assert!(a.nrows() > 0 && a.ncols() > 0, "spectral_info needs a nonempty matrix");
    let sv = a.clone().svd(false, false).singular_values;
    let norm_a = sv.max();
    let gamma = if a.nrows() > a.ncols() {
        0.0
    } else {
        sv.min().max(0.0)
    };
    SpectralInfo {
        norm_a,
        gamma,
        full_row_rank: gamma > rank_tolerance,
    }
}

/// [`spectral_info`] with the default relative tolerance.
pub fn spectral_info_default(a: &DMatrix<f64>) -> SpectralInfo {
    let norm = a.clone().svd(false, false).singular_values.max();
    spectral_info(a, default_rank_tolerance(norm))
}
