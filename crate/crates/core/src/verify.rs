//! Exhaustive oracles for small instances: spark, l0 search, rank checks,
//! and recovery scoring.

use crate::error::{shape_err, Error, Result};
use crate::linalg::{lstsq, numerical_rank, singular_values};
use crate::matrix::Matrix;
use crate::norms::row_support;
use crate::scalar::Real;

/// Column-count cap for [`spark`].
pub const SPARK_MAX_COLS: usize = 24;
/// Caps for [`brute_force_l0`].
pub const L0_MAX_COLS: usize = 24;
pub const L0_MAX_SPARSITY: usize = 6;
/// Subsets with `sigma_min / sigma_max` below this count as dependent.
pub const DEPENDENCE_TOL: f64 = 1e-10;

/// Smallest number of linearly dependent columns; `N + 1` when all columns
/// are independent.
pub fn spark<T: Real>(a: &Matrix<T>) -> Result<usize> {
    spark_with_limit(a, SPARK_MAX_COLS)
}

/// [`spark`] with a custom column cap.
///
/// Subsets are explored depth-first, extending only independent sets, with
/// an incrementally updated Gram-Schmidt factor `A_S = Q R`. For each new
/// subset the ratio `sigma_min / sigma_max` is bracketed by
/// `[rho, j * rho]`, `rho = 1 / (||R||_F ||R^{-1}||_F)`; only subsets whose
/// bracket straddles the threshold pay for an SVD.
pub fn spark_with_limit<T: Real>(a: &Matrix<T>, max_cols: usize) -> Result<usize> {
    let n = a.cols();
    if n > max_cols {
        return Err(Error::SizeLimit {
            what: "columns for exhaustive spark",
            value: n,
            limit: max_cols,
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("spark of a matrix without columns".into()));
    }
    let cols: Vec<Vec<T>> = (0..n).map(|j| a.col_vec(j)).collect();
    let mut search = SparkSearch {
        cols: &cols,
        tol: T::lit(DEPENDENCE_TOL),
        best: n + 1,
        basis: Vec::new(),
        r: Vec::new(),
        rinv: Vec::new(),
        r_fro2: T::zero(),
        rinv_fro2: T::zero(),
    };
    search.extend(0)?;
    Ok(search.best)
}

struct SparkSearch<'a, T> {
    cols: &'a [Vec<T>],
    tol: T,
    best: usize,
    /// orthonormal basis of the current subset
    basis: Vec<Vec<T>>,
    /// upper-triangular factor, stored by columns
    r: Vec<Vec<T>>,
    rinv: Vec<Vec<T>>,
    r_fro2: T,
    rinv_fro2: T,
}

fn dotv<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

impl<T: Real> SparkSearch<'_, T> {
    fn extend(&mut self, first: usize) -> Result<()> {
        let depth = self.basis.len();
        // a dependent set of size depth + 1 can only improve on best if smaller
        if depth + 1 >= self.best {
            return Ok(());
        }
        for c in first..self.cols.len() {
            if depth + 1 >= self.best {
                return Ok(());
            }
            let col = &self.cols[c];
            // classical Gram-Schmidt, applied twice
            let mut w = col.clone();
            let mut coef = vec![T::zero(); depth];
            for _ in 0..2 {
                for (k, q) in self.basis.iter().enumerate() {
                    let h = dotv(q, &w);
                    coef[k] = coef[k] + h;
                    for (wi, &qi) in w.iter_mut().zip(q) {
                        *wi = *wi - h * qi;
                    }
                }
            }
            let rho = dotv(&w, &w).sqrt();
            let dependent = if rho == T::zero() {
                true
            } else {
                // new column of R^{-1}: [-R_S^{-1} coef / rho; 1 / rho]
                let mut new_inv = vec![T::zero(); depth + 1];
                for (i, slot) in new_inv.iter_mut().enumerate().take(depth) {
                    let mut acc = T::zero();
                    for (k, &ck) in coef.iter().enumerate().skip(i) {
                        acc = acc + self.rinv[k][i] * ck;
                    }
                    *slot = -acc / rho;
                }
                new_inv[depth] = T::one() / rho;
                let r_fro2 = self.r_fro2 + dotv(col, col);
                let rinv_fro2 = self.rinv_fro2 + dotv(&new_inv, &new_inv);
                let lower = T::one() / (r_fro2 * rinv_fro2).sqrt();
                let j = T::lit((depth + 1) as f64);
                let verdict = if !lower.is_finite() || lower * j < self.tol {
                    true
                } else if lower >= self.tol {
                    false
                } else {
                    self.exact_ratio(&coef, rho)? < self.tol
                };
                if !verdict {
                    let q: Vec<T> = w.iter().map(|&x| x / rho).collect();
                    let mut rcol = coef.clone();
                    rcol.push(rho);
                    let saved = (self.r_fro2, self.rinv_fro2);
                    self.basis.push(q);
                    self.r.push(rcol);
                    self.rinv.push(new_inv);
                    self.r_fro2 = r_fro2;
                    self.rinv_fro2 = rinv_fro2;
                    self.extend(c + 1)?;
                    self.basis.pop();
                    self.r.pop();
                    self.rinv.pop();
                    (self.r_fro2, self.rinv_fro2) = saved;
                }
                verdict
            };
            if dependent {
                self.best = self.best.min(depth + 1);
            }
        }
        Ok(())
    }

    /// `sigma_min / sigma_max` of the current subset plus the candidate column.
    fn exact_ratio(&self, coef: &[T], rho: T) -> Result<T> {
        let j = coef.len() + 1;
        let mut r = Matrix::zeros(j, j);
        for (k, col) in self.r.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                r[(i, k)] = v;
            }
        }
        for (i, &v) in coef.iter().enumerate() {
            r[(i, j - 1)] = v;
        }
        r[(j - 1, j - 1)] = rho;
        let sv = singular_values(&r)?;
        Ok(if sv[0] > T::zero() { sv[j - 1] / sv[0] } else { T::zero() })
    }
}

/// Largest `s` with `s <= (spark - 1 + r) / 2`.
///
/// When `spark - 1 + r` is even the bound itself is not sufficient: with
/// columns `a_2 = a_0 + a_1` (spark 3), rank-2 matrices on `{0, 1}` and
/// `{0, 2}` can share an image. Uniqueness needs `2 s < spark - 1 + r`.
pub fn max_recoverable_sparsity(spark: usize, r: usize) -> usize {
    (spark + r).saturating_sub(1) / 2
}

/// Result of the exhaustive l0 search.
#[derive(Clone, Debug)]
pub struct L0Solution<T> {
    /// `N x r` solution with zero rows off the support.
    pub w: Matrix<T>,
    pub support: Vec<usize>,
    /// Another support of the same size fits with a different solution.
    pub multiple: bool,
    /// How many supports of the winning size fit.
    pub fits_at_size: usize,
}

/// Sparsest `W` with `A W = V` up to `fit_tol * ||V||_F`, by enumerating
/// supports of increasing size (lexicographically smallest wins ties).
/// Returns `None` when no support of size `<= s_max` fits.
pub fn brute_force_l0<T: Real>(
    a: &Matrix<T>,
    v: &Matrix<T>,
    s_max: usize,
    fit_tol: T,
) -> Result<Option<L0Solution<T>>> {
    let (m, n) = a.shape();
    if v.rows() != m {
        return Err(shape_err("brute_force_l0", a.shape(), v.shape()));
    }
    if n > L0_MAX_COLS {
        return Err(Error::SizeLimit {
            what: "columns for exhaustive l0 search",
            value: n,
            limit: L0_MAX_COLS,
        });
    }
    if s_max > L0_MAX_SPARSITY {
        return Err(Error::SizeLimit {
            what: "sparsity for exhaustive l0 search",
            value: s_max,
            limit: L0_MAX_SPARSITY,
        });
    }
    if !(fit_tol > T::zero()) {
        return Err(Error::InvalidArgument("fit_tol must be positive".into()));
    }
    let v_norm = v.frobenius_norm();
    if v_norm == T::zero() {
        return Ok(Some(L0Solution {
            w: Matrix::zeros(n, v.cols()),
            support: Vec::new(),
            multiple: false,
            fits_at_size: 1,
        }));
    }
    let threshold = fit_tol * v_norm;
    let lstsq_tol = T::lit(1e-12);

    for size in 1..=s_max.min(m).min(n) {
        let mut fits: Vec<(Vec<usize>, Matrix<T>)> = Vec::new();
        for support in Combinations::new(n, size) {
            let sub = a.select_cols(&support);
            let Some(coef) = lstsq(&sub, v, lstsq_tol)? else {
                continue;
            };
            let resid = sub.mm(&coef).sub(v)?;
            if resid.frobenius_norm() <= threshold {
                fits.push((support, coef));
            }
        }
        if let Some((support, coef)) = fits.first() {
            let mut w = Matrix::zeros(n, v.cols());
            for (k, &i) in support.iter().enumerate() {
                w.row_mut(i).copy_from_slice(coef.row(k));
            }
            let scale = w.frobenius_norm();
            let multiple = fits.iter().skip(1).any(|(other_support, other_coef)| {
                let mut other = Matrix::zeros(n, v.cols());
                for (k, &i) in other_support.iter().enumerate() {
                    other.row_mut(i).copy_from_slice(other_coef.row(k));
                }
                other.sub(&w).map_or(true, |d| d.frobenius_norm() > T::lit(1e-6) * scale)
            });
            return Ok(Some(L0Solution {
                w,
                support: support.clone(),
                multiple,
                fits_at_size: fits.len(),
            }));
        }
    }
    Ok(None)
}

/// Lexicographic `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// `rank(X) == rank(A X)` at relative tolerance `tol`.
pub fn rank_preservation_check<T: Real>(a: &Matrix<T>, x: &Matrix<T>, tol: T) -> Result<bool> {
    let ax = a.matmul(x)?;
    Ok(numerical_rank(x, tol)? == numerical_rank(&ax, tol)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryReport {
    pub rel_error: f64,
    pub support_match: bool,
    pub success: bool,
}

/// Relative Frobenius error, support agreement at `support_tol` (absolute
/// row-norm threshold applied to both matrices) and success at
/// `rel_error < success_tol`.
pub fn recovery_report<T: Real>(
    x_hat: &Matrix<T>,
    x_true: &Matrix<T>,
    success_tol: f64,
    support_tol: T,
) -> Result<RecoveryReport> {
    if x_hat.shape() != x_true.shape() {
        return Err(shape_err("recovery_report", x_hat.shape(), x_true.shape()));
    }
    let denom = x_true.frobenius_norm();
    if denom == T::zero() {
        return Err(Error::InvalidArgument("reference matrix is zero".into()));
    }
    let rel_error = (x_hat.sub(x_true)?.frobenius_norm() / denom).as_f64();
    Ok(RecoveryReport {
        rel_error,
        support_match: row_support(x_hat, support_tol) == row_support(x_true, support_tol),
        success: rel_error < success_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, Rng};

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    /// Direct definition: smallest j with a j-subset whose SVD ratio is
    /// below the threshold.
    fn spark_by_svd(a: &Matrix<f64>) -> usize {
        let n = a.cols();
        for j in 1..=n {
            for s in Combinations::new(n, j) {
                let sv = singular_values(&a.select_cols(&s)).unwrap();
                let ratio = if sv[0] > 0.0 {
                    if j > a.rows() { 0.0 } else { sv[j - 1] / sv[0] }
                } else {
                    0.0
                };
                if ratio < DEPENDENCE_TOL {
                    return j;
                }
            }
        }
        n + 1
    }

    #[test]
    fn spark_examples() {
        assert_eq!(spark(&Matrix::<f64>::identity(3)).unwrap(), 4);
        assert_eq!(spark(&m(&[&[1.0, 1.0, 0.0], &[2.0, 2.0, 1.0]])).unwrap(), 2);
        assert_eq!(spark(&m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]])).unwrap(), 3);
        assert_eq!(spark(&m(&[&[0.0, 1.0], &[0.0, 3.0]])).unwrap(), 1);
        assert!(matches!(
            spark(&Matrix::<f64>::zeros(2, 25)),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn spark_matches_definition_on_random_and_structured_inputs() {
        let mut rng = Rng::new(90);
        for trial in 0..12 {
            let (rows, cols) = (3 + trial % 3, 6 + trial % 3);
            let mut a: Matrix<f64> = gaussian_matrix(rows, cols, &mut rng).unwrap();
            if trial % 2 == 1 {
                // plant a dependent triple
                for i in 0..rows {
                    a[(i, 4)] = 0.5 * a[(i, 1)] - 2.0 * a[(i, 3)];
                }
            }
            assert_eq!(spark(&a).unwrap(), spark_by_svd(&a), "trial {trial}");
        }
    }

    #[test]
    fn appending_a_column_never_increases_spark() {
        let mut rng = Rng::new(91);
        let a: Matrix<f64> = gaussian_matrix(4, 7, &mut rng).unwrap();
        let base = spark(&a).unwrap();
        for extra in 0..3 {
            let col: Matrix<f64> = gaussian_matrix(4, 1, &mut rng).unwrap();
            let grown = Matrix::from_fn(4, 8, |i, j| if j < 7 { a[(i, j)] } else { col[(i, 0)] * (extra as f64) });
            assert!(spark(&grown).unwrap() <= base);
        }
    }

    #[test]
    fn recoverable_sparsity_bound() {
        assert_eq!(max_recoverable_sparsity(3, 1), 1);
        assert_eq!(max_recoverable_sparsity(3, 2), 2);
        for m_rows in 1..20 {
            for s in 1..=m_rows {
                assert!(s <= max_recoverable_sparsity(m_rows + 1, s));
            }
        }
    }

    #[test]
    fn brute_force_examples() {
        let a = m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]);
        let sol = brute_force_l0(&a, &m(&[&[1.0], &[0.0]]), 1, 1e-10).unwrap().unwrap();
        assert_eq!(sol.support, vec![0]);
        assert_eq!(sol.w, m(&[&[1.0], &[0.0], &[0.0]]));
        assert!(!sol.multiple);

        // needs two columns
        assert!(brute_force_l0(&a, &m(&[&[1.0], &[2.0]]), 1, 1e-10).unwrap().is_none());

        assert!(matches!(
            brute_force_l0(&a, &m(&[&[1.0], &[2.0]]), 7, 1e-10),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn brute_force_recovers_unique_solution() {
        let mut rng = Rng::new(5);
        let a: Matrix<f64> = gaussian_matrix(6, 10, &mut rng).unwrap();
        let mut w = Matrix::zeros(10, 2);
        for (&i, vals) in [2usize, 7].iter().zip([[1.0, -0.5], [0.3, 2.0]]) {
            w.row_mut(i).copy_from_slice(&vals);
        }
        let sol = brute_force_l0(&a, &a.mm(&w), 3, 1e-10).unwrap().unwrap();
        assert_eq!(sol.support, vec![2, 7]);
        assert!(sol.w.sub(&w).unwrap().frobenius_norm() < 1e-10);
    }

    #[test]
    fn combinations_are_lexicographic() {
        let all: Vec<Vec<usize>> = Combinations::new(4, 2).collect();
        assert_eq!(
            all,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(Combinations::new(3, 3).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    #[test]
    fn rank_preservation() {
        let mut rng = Rng::new(8);
        let a: Matrix<f64> = gaussian_matrix(5, 8, &mut rng).unwrap();
        let mut x = Matrix::zeros(8, 3);
        for i in [1usize, 4] {
            for j in 0..3 {
                x[(i, j)] = rng.standard_normal();
            }
        }
        assert!(rank_preservation_check(&a, &x, 1e-10).unwrap());
        assert!(rank_preservation_check(&a, &Matrix::zeros(8, 2), 1e-10).unwrap());

        // kernel vector supported on {0,1,2} placed as a column of X
        let mut b = a.clone();
        for i in 0..5 {
            b[(i, 2)] = b[(i, 0)] + b[(i, 1)];
        }
        let mut x = Matrix::zeros(8, 2);
        x[(0, 0)] = 1.0;
        x[(1, 0)] = 1.0;
        x[(2, 0)] = -1.0;
        x[(0, 1)] = 1.0;
        assert!(!rank_preservation_check(&b, &x, 1e-10).unwrap());
    }

    #[test]
    fn recovery_report_examples() {
        let x = m(&[&[1.0, 2.0], &[0.0, 0.0], &[3.0, -1.0]]);
        let same = recovery_report(&x, &x, 1e-3, 1e-8).unwrap();
        assert_eq!(same.rel_error, 0.0);
        assert!(same.success && same.support_match);

        let zero = recovery_report(&Matrix::zeros(3, 2), &x, 1e-3, 1e-8).unwrap();
        assert_eq!(zero.rel_error, 1.0);
        assert!(!zero.success && !zero.support_match);

        let mut e = Matrix::zeros(3, 2);
        e[(1, 0)] = 1e-5 * x.frobenius_norm();
        let r = recovery_report(&x.add(&e).unwrap(), &x, 1e-3, 1e-8).unwrap();
        assert!((r.rel_error - 1e-5).abs() < 1e-15);
        assert!(!r.support_match);

        assert!(recovery_report(&x, &Matrix::zeros(3, 2), 1e-3, 1e-8).is_err());
    }
}
