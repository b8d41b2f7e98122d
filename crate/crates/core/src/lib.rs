//! Joint sparse recovery: reduce an MMV problem `A X = Y` to the
//! full-column-rank case, then recover the row-sparse unknown by minimizing
//! the Huber-smoothed l2,1 norm of its orthogonal factor with nonlinear
//! conjugate gradients.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below name the double-precision types used by the
//! benchmark harness.
//!
//! Pipeline:
//! - [`reduction::reduce_problem`] factors `Y = V U` with `U U^T = I`.
//! - [`mansolve::multi_start_solve`] minimizes the smoothed objective over
//!   full-rank `N x r` matrices.
//! - [`reduction::lift_solution`] maps the reduced solution back: `X = W U`.
//!
//! [`l21base`] holds the convex l2,1 baseline, [`verify`] the exhaustive
//! oracles (spark, l0 search) used to check recoveries on small inputs.

// `!(x > 0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod l21base;
pub mod linalg;
pub mod mansolve;
pub mod matrix;
pub mod norms;
pub mod penalty;
pub mod random;
pub mod reduction;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use random::{ProblemInstance, Rng};
pub use scalar::Real;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type ProblemInstance64 = ProblemInstance<f64>;
pub type ReducedProblem64 = reduction::ReducedProblem<f64>;
pub type SolveResult64 = mansolve::SolveResult<f64>;
pub type ObjectiveParams64 = penalty::ObjectiveParams<f64>;
