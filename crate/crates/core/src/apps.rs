//! Reductions of linear classification and ranking models to [`CopProblem`]:
//! 0/1-loss SVM, twin SVM, binary-relevance multi-label classification and
//! ridge regression with a maximum-rank-correlation penalty.
//!
//! Builders take raw features and always append a bias column of ones.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::ialm::{solve, SolveOptions, SolveReport};
use crate::problem::{positive_count, CopProblem, SmoothObjective};

/// Default gap `xi` for the rank-correlation constraint rows.
pub const DEFAULT_MRC_XI: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// One `+-1` label per row.
    Binary(DVector<f64>),
    /// `n x m` matrix of `+-1` labels.
    MultiLabel(DMatrix<f64>),
    /// Real responses.
    Real(DVector<f64>),
}

/// Raw features (without bias) and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: DMatrix<f64>,
    pub targets: Targets,
}

fn check_signs(values: impl Iterator<Item = f64>) -> Result<()> {
    for v in values {
        if v != 1.0 && v != -1.0 {
            return Err(Error::InvalidInput(format!("labels must be +1 or -1, found {v}")));
        }
    }
    Ok(())
}

fn check_finite(x: &DMatrix<f64>) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("features must be finite".into()))
    }
}

impl LabeledDataset {
    pub fn binary(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        check_len("labels", x.nrows(), y.len())?;
        check_signs(y.iter().copied())?;
        check_finite(&x)?;
        Ok(Self {
            x,
            targets: Targets::Binary(y),
        })
    }

    pub fn multi_label(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        check_len("label rows", x.nrows(), y.nrows())?;
        check_signs(y.iter().copied())?;
        check_finite(&x)?;
        Ok(Self {
            x,
            targets: Targets::MultiLabel(y),
        })
    }

    pub fn regression(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        check_len("responses", x.nrows(), y.len())?;
        check_finite(&x)?;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("responses must be finite".into()));
        }
        Ok(Self {
            x,
            targets: Targets::Real(y),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Label matrix for classification data (one column for binary data).
    pub fn label_matrix(&self) -> Result<DMatrix<f64>> {
        match &self.targets {
            Targets::Binary(y) => Ok(DMatrix::from_column_slice(y.len(), 1, y.as_slice())),
            Targets::MultiLabel(y) => Ok(y.clone()),
            Targets::Real(_) => Err(Error::InvalidInput("expected classification labels".into())),
        }
    }
}

/// `[X, 1]`.
pub fn append_bias(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(x.ncols(), 1.0)
}

/// `A = -diag(y) X`, `b = 1`, `f = 1/2 ||w||^2`, for features that already
/// carry their bias column.
pub fn svm_from_biased(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<CopProblem> {
    check_len("labels", x.nrows(), y.len())?;
    check_signs(y.iter().copied())?;
    let mut a = x.clone();
    for (mut row, &label) in a.row_iter_mut().zip(y.iter()) {
        row *= -label;
    }
    CopProblem::new(SmoothObjective::half_squared_norm(x.ncols()), a, DVector::from_element(x.nrows(), 1.0), lambda)
}

/// 0/1-loss SVM: `min 1/2 ||w||^2 + lambda ||(1 - y ⊙ X w)_+||_0` with bias.
pub fn build_svm(data: &LabeledDataset, lambda: f64) -> Result<CopProblem> {
    match &data.targets {
        Targets::Binary(y) => svm_from_biased(&append_bias(&data.x), y, lambda),
        _ => Err(Error::InvalidInput("SVM needs binary labels".into())),
    }
}

/// Twin SVM. The first problem fits the positive class
/// (`H = I + l1 X+^T X+`, `A = X-`, weight `l2`), the second the negative class
/// (`H = I + l3 X-^T X-`, `A = -X+`, weight `l4`); `b = 1` for both.
pub fn build_tsvm(pos: &DMatrix<f64>, neg: &DMatrix<f64>, lambdas: (f64, f64, f64, f64)) -> Result<(CopProblem, CopProblem)> {
    if pos.nrows() == 0 || neg.nrows() == 0 {
        return Err(Error::InvalidInput("both classes must be nonempty".into()));
    }
    check_len("feature columns", pos.ncols(), neg.ncols())?;
    check_finite(pos)?;
    check_finite(neg)?;
    let (l1, l2, l3, l4) = lambdas;
    let xp = append_bias(pos);
    let xn = append_bias(neg);
    let p = xp.ncols();
    let fit = |x: &DMatrix<f64>, weight: f64| {
        let h = DMatrix::identity(p, p) + x.tr_mul(x) * weight;
        SmoothObjective::quadratic(h, DVector::zeros(p), 0.0)
    };
    let first = CopProblem::new(fit(&xp, l1)?, xn.clone(), DVector::from_element(xn.nrows(), 1.0), l2)?;
    let second = CopProblem::new(fit(&xn, l3)?, -xp.clone(), DVector::from_element(xp.nrows(), 1.0), l4)?;
    Ok((first, second))
}

/// Binary relevance: one SVM problem per label column.
pub fn build_mlc(data: &LabeledDataset, lambda: f64) -> Result<Vec<CopProblem>> {
    let y = match &data.targets {
        Targets::MultiLabel(y) => y,
        Targets::Binary(y) => return Ok(vec![svm_from_biased(&append_bias(&data.x), y, lambda)?]),
        Targets::Real(_) => return Err(Error::InvalidInput("MLC needs +-1 labels".into())),
    };
    let x = append_bias(&data.x);
    (0..y.ncols())
        .map(|k| svm_from_biased(&x, &y.column(k).into_owned(), lambda))
        .collect()
}

/// `(n-1) x n` matrix with `1` on the diagonal and `-1` on the superdiagonal.
pub fn difference_matrix(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n.saturating_sub(1), n);
    for i in 0..n.saturating_sub(1) {
        b[(i, i)] = 1.0;
        b[(i, i + 1)] = -1.0;
    }
    b
}

#[derive(Debug, Clone)]
pub struct MrcProblem {
    pub problem: CopProblem,
    /// `permutation[i]` is the original row placed at sorted position `i`.
    pub permutation: Vec<usize>,
    /// Biased features in sorted order.
    pub x_sorted: DMatrix<f64>,
    pub y_sorted: DVector<f64>,
}

/// Ridge regression with a rank-correlation penalty:
/// `min 1/2 ||Xw - y||^2 + l1/2 ||w||^2 + l2 ||(xi 1 + B X w)_+||_0`
/// after sorting rows by ascending response (stable, so ties keep their
/// input order and still get a constraint row).
pub fn build_mrc(x: &DMatrix<f64>, y: &DVector<f64>, lambda1: f64, lambda2: f64, xi: f64) -> Result<MrcProblem> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!("MRC needs at least 2 observations, got {n}")));
    }
    check_len("responses", n, y.len())?;
    check_finite(x)?;
    if !(lambda1 > 0.0 && xi > 0.0) {
        return Err(Error::InvalidInput("lambda1 and xi must be positive".into()));
    }
    let mut permutation: Vec<usize> = (0..n).collect();
    permutation.sort_by(|&i, &j| y[i].total_cmp(&y[j]));
    let xb = append_bias(x);
    let x_sorted = xb.select_rows(&permutation);
    let y_sorted = DVector::from_iterator(n, permutation.iter().map(|&i| y[i]));
    let p = xb.ncols();

    let h = x_sorted.tr_mul(&x_sorted) + DMatrix::identity(p, p) * lambda1;
    let c = -x_sorted.tr_mul(&y_sorted);
    let f = SmoothObjective::quadratic(h, c, 0.5 * y_sorted.norm_squared())?;
    let a = difference_matrix(n) * &x_sorted;
    let problem = CopProblem::new(f, a, DVector::from_element(n - 1, xi), lambda2)?;
    Ok(MrcProblem {
        problem,
        permutation,
        x_sorted,
        y_sorted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Svm,
    Mlc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Fraction of correctly predicted labels (over all `n m` entries).
    pub accuracy: f64,
    /// `1/(2nm) sum_i ||C(x_i) - y_i||_1`.
    pub hamming_loss: f64,
    /// Total count of positive components of `Aw + b` over all labels.
    pub zero_one_objective: usize,
}

/// `1` for `t > 0`, `-1` otherwise.
pub fn sgn(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Scores one model per label column (a single model for SVM data).
pub fn evaluate(models: &[DVector<f64>], data: &LabeledDataset, task: Task) -> Result<Evaluation> {
    let y = data.label_matrix()?;
    let m = y.ncols();
    if task == Task::Svm && m != 1 {
        return Err(Error::InvalidInput("SVM evaluation needs binary labels".into()));
    }
    check_len("models", m, models.len())?;
    let x = append_bias(&data.x);
    let n = x.nrows();
    let mut wrong = 0usize;
    let mut zero_one = 0usize;
    for (k, w) in models.iter().enumerate() {
        check_len("model", x.ncols(), w.len())?;
        let scores = &x * w;
        for i in 0..n {
            if sgn(scores[i]) != y[(i, k)] {
                wrong += 1;
            }
        }
        let margins = DVector::from_fn(n, |i, _| 1.0 - y[(i, k)] * scores[i]);
        zero_one += positive_count(&margins);
    }
    let total = (n * m) as f64;
    Ok(Evaluation {
        accuracy: (n * m - wrong) as f64 / total,
        hamming_loss: 2.0 * wrong as f64 / (2.0 * total),
        zero_one_objective: zero_one,
    })
}

/// Solves each problem independently on up to `jobs` worker threads. Results
/// are returned in input order and do not depend on `jobs`.
pub fn solve_many(problems: &[CopProblem], opts: &SolveOptions, jobs: usize) -> Result<Vec<SolveReport>> {
    let jobs = jobs.clamp(1, problems.len().max(1));
    if jobs == 1 {
        return problems.iter().map(|p| solve(p, opts)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<SolveReport>>>> = problems.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= problems.len() {
                    break;
                }
                let result = solve(&problems[i], opts);
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

/// Seeded, linearly separable 2-D data.
#[derive(Debug, Clone)]
pub struct SeparableData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Unit normal of the separating line `normal^T x = offset`.
    pub normal: [f64; 2],
    pub offset: f64,
}

/// `n` seeded points in `[-3, 3]^2` with alternating labels, separated by a
/// random line with distance at least `margin` from every point.
pub fn separable_2d(n: usize, margin: f64, seed: u64) -> SeparableData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let normal = [angle.cos(), angle.sin()];
    let offset: f64 = rng.random_range(-0.5..0.5);
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        loop {
            let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let d = a * normal[0] + b * normal[1] - offset;
            if d * label >= margin {
                x[(i, 0)] = a;
                x[(i, 1)] = b;
                y[i] = label;
                break;
            }
        }
    }
    SeparableData { x, y, normal, offset }
}

/// Appends `extra` random cosine features `scale * cos(omega^T x + phi)`
/// (high-frequency `omega`, seeded) to the raw features. Keeping the original
/// columns preserves linear separability while the extra columns make the
/// constraint matrix of a small dataset full row rank.
pub fn lift_random_features(x: &DMatrix<f64>, extra: usize, scale: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = x.ncols();
    let omega = DMatrix::from_fn(d, extra, |_, _| rng.random_range(-50.0..50.0));
    let phi: Vec<f64> = (0..extra).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let proj = x * omega;
    let mut out = DMatrix::zeros(x.nrows(), d + extra);
    out.columns_mut(0, d).copy_from(x);
    for j in 0..extra {
        for i in 0..x.nrows() {
            out[(i, d + j)] = scale * (proj[(i, j)] + phi[j]).cos();
        }
    }
    out
}
