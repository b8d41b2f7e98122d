//! Reduction of `A X = Y` to a full-column-rank unknown.
//!
//! `Y` (rank `r`) is factored as `V U` with `U U^T = I_r` via the compact
//! SVD. A row-sparse `W` solving `A W = V` then lifts to `X = W U`; since the
//! rows of `U` are orthonormal, `||W1 U - W2 U||_F = ||W1 - W2||_F`, so
//! errors in the reduced solve are not amplified by the lift.

use crate::error::{shape_err, Error, Result};
use crate::linalg::thin_svd;
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Default relative threshold on `sigma_i / sigma_1` for the essential rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Compact SVD `Y = left * diag(singular_values) * right_rows`.
#[derive(Clone, Debug)]
pub struct SvdFactors<T> {
    /// `m x r`, orthonormal columns.
    pub left: Matrix<T>,
    /// Non-increasing, positive, length `r`.
    pub singular_values: Vec<T>,
    /// `r x n`, orthonormal rows.
    pub right_rows: Matrix<T>,
}

impl<T: Real> SvdFactors<T> {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reassemble(&self) -> Matrix<T> {
        let mut scaled = self.left.clone();
        for i in 0..scaled.rows() {
            for (v, &s) in scaled.row_mut(i).iter_mut().zip(&self.singular_values) {
                *v = *v * s;
            }
        }
        scaled.mm(&self.right_rows)
    }
}

/// Number of `sigma_i > rank_tol * sigma_1`; zero when `sigma_1 == 0`.
pub fn estimate_rank<T: Real>(singular_values: &[T], rank_tol: T) -> usize {
    match singular_values.first() {
        Some(&top) if top > T::zero() => singular_values
            .iter()
            .take_while(|&&s| s > rank_tol * top)
            .count(),
        _ => 0,
    }
}

/// Compact SVD keeping every singular value above `rank_tol * sigma_1`
/// (and above a `max(m, n) * eps * sigma_1` floor).
///
/// Each left singular vector is signed so that its largest-magnitude entry
/// is non-negative, which makes the factorization deterministic.
pub fn compact_svd<T: Real>(y: &Matrix<T>, rank_tol: T) -> Result<SvdFactors<T>> {
    compact_svd_capped(y, rank_tol, None)
}

/// [`compact_svd`] keeping at most `max_rank` leading triplets.
pub fn compact_svd_capped<T: Real>(
    y: &Matrix<T>,
    rank_tol: T,
    max_rank: Option<usize>,
) -> Result<SvdFactors<T>> {
    if y.rows() == 0 || y.cols() == 0 {
        return Err(Error::InvalidArgument("compact SVD of an empty matrix".into()));
    }
    if rank_tol < T::zero() {
        return Err(Error::InvalidArgument("rank_tol must be non-negative".into()));
    }
    let svd = thin_svd(y)?;
    let guard = T::lit(y.rows().max(y.cols()) as f64) * T::epsilon();
    let mut r = estimate_rank(&svd.sigma, rank_tol.max(guard));
    if let Some(cap) = max_rank {
        r = r.min(cap);
    }
    if r == 0 {
        return Err(Error::DegenerateRank(
            "matrix has no singular value above the threshold".into(),
        ));
    }
    let keep: Vec<usize> = (0..r).collect();
    let mut left = svd.u.select_cols(&keep);
    let mut right_rows = svd.vt.select_rows(&keep);
    for j in 0..r {
        let mut pivot = T::zero();
        for i in 0..left.rows() {
            if left[(i, j)].abs() > pivot.abs() {
                pivot = left[(i, j)];
            }
        }
        if pivot < T::zero() {
            for i in 0..left.rows() {
                left[(i, j)] = -left[(i, j)];
            }
            for v in right_rows.row_mut(j) {
                *v = -*v;
            }
        }
    }
    Ok(SvdFactors {
        left,
        singular_values: svd.sigma[..r].to_vec(),
        right_rows,
    })
}

/// `Y ~= V U` with `V = left * diag(sigma)` (`m x r`) and `U` (`r x n`)
/// having orthonormal rows.
#[derive(Clone, Debug)]
pub struct OutputFactors<T> {
    pub v: Matrix<T>,
    pub u: Matrix<T>,
    pub rank: usize,
}

pub fn factor_output<T: Real>(y: &Matrix<T>, rank_tol: T) -> Result<OutputFactors<T>> {
    factor_output_capped(y, rank_tol, None)
}

pub fn factor_output_capped<T: Real>(
    y: &Matrix<T>,
    rank_tol: T,
    max_rank: Option<usize>,
) -> Result<OutputFactors<T>> {
    let f = compact_svd_capped(y, rank_tol, max_rank)?;
    let rank = f.rank();
    let mut v = f.left;
    for i in 0..v.rows() {
        for (x, &s) in v.row_mut(i).iter_mut().zip(&f.singular_values) {
            *x = *x * s;
        }
    }
    Ok(OutputFactors {
        v,
        u: f.right_rows,
        rank,
    })
}

/// `X = W U`.
pub fn lift_solution<T: Real>(w: &Matrix<T>, u: &Matrix<T>) -> Result<Matrix<T>> {
    if w.cols() != u.rows() {
        return Err(shape_err("lift_solution", w.shape(), u.shape()));
    }
    Ok(w.mm(u))
}

/// The full-rank reformulation: find row-sparse `W` (`n x r`) with `A W = V`.
#[derive(Clone, Debug)]
pub struct ReducedProblem<T> {
    pub a: Matrix<T>,
    pub v: Matrix<T>,
    pub u: Matrix<T>,
    pub rank: usize,
}

impl<T: Real> ReducedProblem<T> {
    pub fn lift(&self, w: &Matrix<T>) -> Result<Matrix<T>> {
        lift_solution(w, &self.u)
    }

    /// The reduced image `X U^T` of a candidate full solution.
    pub fn project(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        x.matmul_tr(&self.u)
    }
}

pub fn reduce_problem<T: Real>(a: &Matrix<T>, y: &Matrix<T>, rank_tol: T) -> Result<ReducedProblem<T>> {
    reduce_problem_capped(a, y, rank_tol, None)
}

/// [`reduce_problem`] keeping at most `max_rank` triplets, for callers with
/// a sparsity estimate `s` (the rank of an `s`-row-sparse `X` is at most `s`).
pub fn reduce_problem_capped<T: Real>(
    a: &Matrix<T>,
    y: &Matrix<T>,
    rank_tol: T,
    max_rank: Option<usize>,
) -> Result<ReducedProblem<T>> {
    if a.rows() != y.rows() {
        return Err(shape_err("reduce_problem", a.shape(), y.shape()));
    }
    let OutputFactors { v, u, rank } = factor_output_capped(y, rank_tol, max_rank)?;
    Ok(ReducedProblem {
        a: a.clone(),
        v,
        u,
        rank,
    })
}
