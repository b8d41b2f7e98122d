//! Row-wise norms and support extraction.

use crate::matrix::Matrix;
use crate::scalar::Real;

/// Relative factor applied to the largest row norm by [`support_tol`].
pub const DEFAULT_SUPPORT_REL_TOL: f64 = 1e-8;

/// Sum of the Euclidean norms of the rows.
pub fn l21_norm<T: Real>(x: &Matrix<T>) -> T {
    x.row_norms().into_iter().sum()
}

/// Number of rows whose Euclidean norm exceeds `tol`.
pub fn l0_rows<T: Real>(x: &Matrix<T>, tol: T) -> usize {
    x.row_norms().into_iter().filter(|&n| n > tol).count()
}

/// Sorted indices of rows whose Euclidean norm exceeds `tol`.
pub fn row_support<T: Real>(x: &Matrix<T>, tol: T) -> Vec<usize> {
    x.row_norms()
        .into_iter()
        .enumerate()
        .filter(|&(_, n)| n > tol)
        .map(|(i, _)| i)
        .collect()
}

/// Absolute support threshold `rel * max_row_norm(x)`.
pub fn support_tol<T: Real>(x: &Matrix<T>, rel: T) -> T {
    let max = x.row_norms().into_iter().fold(T::zero(), T::max);
    rel * max
}
