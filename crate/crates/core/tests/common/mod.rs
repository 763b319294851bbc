#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zocop::{CopProblem, SmoothObjective};

/// Strongly convex quadratic with `n` in `3..=n_max` rows and at most 20
/// columns; `A` is uniform in `[-1, 1]` and has many more columns than rows.
pub fn random_instance(seed: u64, n_max: usize) -> CopProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=n_max);
    let p = rng.random_range(n + 8..=20);
    let a = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let m = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let h = DMatrix::identity(p, p) + m.tr_mul(&m) * (0.5 / p as f64);
    let c = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
    let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let lambda = rng.random_range(0.5..5.0);
    CopProblem::new(SmoothObjective::quadratic(h, c, 0.0).unwrap(), a, b, lambda).unwrap()
}

pub struct MonotoneData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub w_star: DVector<f64>,
}

/// 15 x 14 features whose consecutive rows (in score order) differ by
/// `s` times the rows of a random orthogonal matrix, and a direction `w_star`
/// whose scores increase with gaps in `[0.5 s, 1.5 s]`. Responses are a
/// monotone transform of the scores; rows are shuffled.
pub fn monotone_data(seed: u64, s: f64) -> MonotoneData {
    let (n, d) = (15, 14);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let mut x = DMatrix::zeros(n, d);
    for j in 0..d {
        x[(0, j)] = rng.random_range(-0.5..0.5);
    }
    for i in 1..n {
        for j in 0..d {
            x[(i, j)] = x[(i - 1, j)] + s * q[(i - 1, j)];
        }
    }
    let gaps = DVector::from_fn(d, |_, _| rng.random_range(0.5..1.5));
    let w_star = q.transpose() * gaps;
    let y = (&x * &w_star).map(|t: f64| t + 0.3 * t.sin());
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    MonotoneData {
        x: x.select_rows(&perm),
        y: DVector::from_iterator(n, perm.iter().map(|&i| y[i])),
        w_star,
    }
}
