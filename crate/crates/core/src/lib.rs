//! Solver library for zero-one composite optimization problems
//!
//! ```text
//! min_w  f(w) + lambda * || (A w + b)_+ ||_0
//! ```
//!
//! where `f` is smooth and `||(.)_+||_0` counts strictly positive components.
//! The problem is solved through its splitting `u = A w + b` with an inexact
//! augmented Lagrangian outer loop ([`ialm`]) whose subproblems are handled by a
//! Bregman alternating linearized inner solver ([`balm`]). The [`zeroone`]
//! module holds the closed-form proximal operator and stationarity residuals,
//! [`oracle`] holds brute-force references, and [`apps`] reduces SVM, twin SVM,
//! multi-label classification and rank-correlation regression to problem
//! instances.
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use zocop::ialm::{solve, SolveOptions, SolveStatus};
//! use zocop::{CopProblem, SmoothObjective};
//!
//! let f = SmoothObjective::quadratic(DMatrix::identity(2, 2), DVector::from_vec(vec![-3.0, 0.0]), 0.0)?;
//! let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
//! let b = DVector::from_vec(vec![-1.0]);
//! let problem = CopProblem::new(f, a, b, 10.0)?;
//!
//! let report = solve(&problem, &SolveOptions::default())?;
//! assert_eq!(report.status, SolveStatus::PStationary);
//! assert_eq!(report.zero_one_loss(), 0);
//! # Ok::<(), zocop::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apps;
pub mod balm;
pub mod cli;
pub mod error;
pub mod ialm;
pub mod io;
pub mod oracle;
pub mod problem;
pub mod zeroone;

pub use error::{Error, Result};
pub use problem::{spectral_info, CopProblem, QuadraticForm, SmoothObjective, SpectralInfo};
