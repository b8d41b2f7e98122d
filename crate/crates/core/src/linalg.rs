//! Dense factorizations: Householder QR, one-sided Jacobi SVD, Cholesky.
//!
//! Everything works on small-to-moderate dense matrices (a few hundred rows,
//! tens of columns). Factorizations operate on column-major scratch copies.

use crate::error::{shape_err, Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

const MAX_JACOBI_SWEEPS: usize = 80;

fn to_columns<T: Real>(a: &Matrix<T>) -> Vec<Vec<T>> {
    (0..a.cols()).map(|j| a.col_vec(j)).collect()
}

fn from_columns<T: Real>(rows: usize, cols: &[Vec<T>]) -> Matrix<T> {
    Matrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Thin QR factorization `A = Q R` of a tall matrix.
#[derive(Clone, Debug)]
pub struct Qr<T> {
    /// `m x n` with orthonormal columns.
    pub q: Matrix<T>,
    /// `n x n` upper triangular.
    pub r: Matrix<T>,
}

/// Householder thin QR of an `m x n` matrix with `m >= n`.
pub fn thin_qr<T: Real>(a: &Matrix<T>) -> Result<Qr<T>> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::InvalidArgument(format!(
            "thin QR needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut cols = to_columns(a);
    let mut reflectors: Vec<Option<Vec<T>>> = Vec::with_capacity(n);
    let mut r = Matrix::zeros(n, n);
    let two = T::lit(2.0);

    for j in 0..n {
        let x = &cols[j][j..];
        let norm = dot(x, x).sqrt();
        if norm == T::zero() {
            reflectors.push(None);
            for (k, col) in cols.iter().enumerate().skip(j) {
                r[(j, k)] = col[j];
            }
            continue;
        }
        let alpha = if x[0] > T::zero() { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] = v[0] - alpha;
        let vnorm2 = dot(&v, &v);
        // reflect the trailing columns
        for col in cols.iter_mut().skip(j + 1) {
            let tail = &mut col[j..];
            let f = two * dot(&v, tail) / vnorm2;
            for (t, &vi) in tail.iter_mut().zip(&v) {
                *t = *t - f * vi;
            }
        }
        r[(j, j)] = alpha;
        for k in j + 1..n {
            r[(j, k)] = cols[k][j];
        }
        let scale = T::one() / vnorm2.sqrt();
        reflectors.push(Some(v.into_iter().map(|vi| vi * scale).collect()));
    }

    // Q = H_0 H_1 ... H_{n-1} [I_n; 0]
    let mut q_cols: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); m];
            e[j] = T::one();
            e
        })
        .collect();
    for (j, refl) in reflectors.iter().enumerate().rev() {
        if let Some(v) = refl {
            for col in q_cols.iter_mut() {
                let tail = &mut col[j..];
                let f = two * dot(v, tail);
                if f != T::zero() {
                    for (t, &vi) in tail.iter_mut().zip(v) {
                        *t = *t - f * vi;
                    }
                }
            }
        }
    }
    Ok(Qr {
        q: from_columns(m, &q_cols),
        r,
    })
}

/// Thin SVD `A = U diag(sigma) Vt` with `p = min(m, n)` triplets sorted by
/// non-increasing singular value. Columns of `U` belonging to exactly-zero
/// singular values are zero.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub u: Matrix<T>,
    pub sigma: Vec<T>,
    pub vt: Matrix<T>,
}

impl<T: Real> Svd<T> {
    /// `sigma_min / sigma_max` (zero for an all-zero input).
    pub fn cond_ratio(&self) -> T {
        match (self.sigma.first(), self.sigma.last()) {
            (Some(&hi), Some(&lo)) if hi > T::zero() => lo / hi,
            _ => T::zero(),
        }
    }
}

/// One-sided Jacobi on the columns of a square or tall matrix.
fn jacobi_svd_tall<T: Real>(a: &Matrix<T>) -> Svd<T> {
    let (m, n) = a.shape();
    let mut b = to_columns(a);
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();
    let eps = T::epsilon();
    let tiny = T::min_positive_value();

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&b[p], &b[p]);
                let beta = dot(&b[q], &b[q]);
                let gamma = dot(&b[p], &b[q]);
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma.abs() < tiny {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = b.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
                let (lo, hi) = v.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = b.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    let mut u = Matrix::zeros(m, n);
    let mut vt = Matrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        if s > T::zero() {
            for i in 0..m {
                u[(i, k)] = b[j][i] / s;
            }
        }
        for i in 0..n {
            vt[(k, i)] = v[j][i];
        }
    }
    Svd { u, sigma, vt }
}

/// Thin SVD of an arbitrary matrix.
pub fn thin_svd<T: Real>(a: &Matrix<T>) -> Result<Svd<T>> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("SVD of an empty matrix".into()));
    }
    if m < n {
        let t = thin_svd(&a.transpose())?;
        return Ok(Svd {
            u: t.vt.transpose(),
            sigma: t.sigma,
            vt: t.u.transpose(),
        });
    }
    if m > n {
        // Jacobi on the triangular factor: A = Q R, R = Ur S Vt.
        let Qr { q, r } = thin_qr(a)?;
        let inner = jacobi_svd_tall(&r);
        return Ok(Svd {
            u: q.mm(&inner.u),
            sigma: inner.sigma,
            vt: inner.vt,
        });
    }
    Ok(jacobi_svd_tall(a))
}

/// Singular values in non-increasing order.
pub fn singular_values<T: Real>(a: &Matrix<T>) -> Result<Vec<T>> {
    Ok(thin_svd(a)?.sigma)
}

/// Count of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank<T: Real>(a: &Matrix<T>, rel_tol: T) -> Result<usize> {
    let sv = singular_values(a)?;
    let top = sv.first().copied().unwrap_or_else(T::zero);
    if top == T::zero() {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rel_tol * top).count())
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(shape_err("cholesky", a.shape(), a.shape()));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if d <= T::zero() || !d.is_finite() {
            return Err(Error::NumericFailure(format!(
                "matrix not positive definite at pivot {j}"
            )));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L L^T X = B` given the lower Cholesky factor.
pub fn cholesky_solve<T: Real>(l: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    let y = solve_lower(l, b)?;
    solve_upper_transposed(l, &y)
}

/// Forward substitution `L X = B` for lower triangular `L`.
pub fn solve_lower<T: Real>(l: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    let n = l.rows();
    if l.cols() != n || b.rows() != n {
        return Err(shape_err("solve_lower", l.shape(), b.shape()));
    }
    let mut x = b.clone();
    for i in 0..n {
        let d = l[(i, i)];
        if d == T::zero() {
            return Err(Error::NumericFailure("zero pivot in triangular solve".into()));
        }
        for k in 0..i {
            let lik = l[(i, k)];
            if lik != T::zero() {
                for j in 0..x.cols() {
                    x[(i, j)] = x[(i, j)] - lik * x[(k, j)];
                }
            }
        }
        for j in 0..x.cols() {
            x[(i, j)] = x[(i, j)] / d;
        }
    }
    Ok(x)
}

/// Back substitution `L^T X = B` for lower triangular `L`.
fn solve_upper_transposed<T: Real>(l: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    let n = l.rows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        for k in i + 1..n {
            let lki = l[(k, i)];
            if lki != T::zero() {
                for j in 0..x.cols() {
                    x[(i, j)] = x[(i, j)] - lki * x[(k, j)];
                }
            }
        }
        let d = l[(i, i)];
        for j in 0..x.cols() {
            x[(i, j)] = x[(i, j)] / d;
        }
    }
    Ok(x)
}

/// Back substitution `R X = B` for upper triangular `R`.
pub fn solve_upper<T: Real>(r: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    let n = r.rows();
    if r.cols() != n || b.rows() != n {
        return Err(shape_err("solve_upper", r.shape(), b.shape()));
    }
    let mut x = b.clone();
    for i in (0..n).rev() {
        for k in i + 1..n {
            let rik = r[(i, k)];
            if rik != T::zero() {
                for j in 0..x.cols() {
                    x[(i, j)] = x[(i, j)] - rik * x[(k, j)];
                }
            }
        }
        let d = r[(i, i)];
        if d == T::zero() {
            return Err(Error::NumericFailure("zero pivot in triangular solve".into()));
        }
        for j in 0..x.cols() {
            x[(i, j)] = x[(i, j)] / d;
        }
    }
    Ok(x)
}

/// Inverse of an upper triangular matrix.
pub fn inv_upper<T: Real>(r: &Matrix<T>) -> Result<Matrix<T>> {
    solve_upper(r, &Matrix::identity(r.rows()))
}

/// Least-squares solution of `A X ~= B` for tall `A` of full column rank.
///
/// Returns `None` when `R` has a diagonal entry below `rank_tol` times the
/// largest one.
pub fn lstsq<T: Real>(a: &Matrix<T>, b: &Matrix<T>, rank_tol: T) -> Result<Option<Matrix<T>>> {
    if a.rows() != b.rows() {
        return Err(shape_err("lstsq", a.shape(), b.shape()));
    }
    let Qr { q, r } = thin_qr(a)?;
    let dmax = (0..r.rows()).fold(T::zero(), |m, i| m.max(r[(i, i)].abs()));
    if (0..r.rows()).any(|i| r[(i, i)].abs() <= rank_tol * dmax) || dmax == T::zero() {
        return Ok(None);
    }
    let qtb = q.tmm(b);
    solve_upper(&r, &qtb).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, Rng};

    fn assert_close(a: &Matrix<f64>, b: &Matrix<f64>, tol: f64) {
        let d = a.sub(b).unwrap().frobenius_norm();
        assert!(d <= tol, "difference {d:e} > {tol:e}");
    }

    fn orthonormal_cols(q: &Matrix<f64>, tol: f64) {
        assert_close(&q.tmm(q), &Matrix::identity(q.cols()), tol);
    }

    #[test]
    fn qr_reassembles() {
        let a: Matrix<f64> = gaussian_matrix(9, 4, &mut Rng::new(2)).unwrap();
        let Qr { q, r } = thin_qr(&a).unwrap();
        orthonormal_cols(&q, 1e-13);
        assert_close(&q.mm(&r), &a, 1e-12);
        for i in 0..4 {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn svd_shapes_and_reassembly() {
        for (m, n, seed) in [(7, 3, 1), (3, 7, 2), (5, 5, 3), (1, 4, 4), (4, 1, 5)] {
            let a: Matrix<f64> = gaussian_matrix(m, n, &mut Rng::new(seed)).unwrap();
            let svd = thin_svd(&a).unwrap();
            let p = m.min(n);
            assert_eq!(svd.sigma.len(), p);
            assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
            orthonormal_cols(&svd.u, 1e-12);
            orthonormal_cols(&svd.vt.transpose(), 1e-12);
            let rebuilt = svd.u.mm(&Matrix::from_diag(&svd.sigma)).mm(&svd.vt);
            assert_close(&rebuilt, &a, 1e-12 * svd.sigma[0]);
        }
    }

    #[test]
    fn svd_of_diagonal() {
        let a = Matrix::from_rows(&[[2.0, 0.0], [0.0, 3.0]]).unwrap();
        let svd = thin_svd(&a).unwrap();
        assert_eq!(svd.sigma, vec![3.0, 2.0]);
    }

    #[test]
    fn rank_of_product() {
        let mut rng = Rng::new(9);
        let l: Matrix<f64> = gaussian_matrix(6, 2, &mut rng).unwrap();
        let r: Matrix<f64> = gaussian_matrix(2, 4, &mut rng).unwrap();
        assert_eq!(numerical_rank(&l.mm(&r), 1e-10).unwrap(), 2);
        assert_eq!(numerical_rank(&Matrix::<f64>::zeros(3, 3), 1e-10).unwrap(), 0);
    }

    #[test]
    fn cholesky_and_triangular_solves() {
        let g: Matrix<f64> = gaussian_matrix(5, 8, &mut Rng::new(4)).unwrap();
        let spd = g.mmt(&g);
        let l = cholesky(&spd).unwrap();
        assert_close(&l.mmt(&l), &spd, 1e-11);
        let b: Matrix<f64> = gaussian_matrix(5, 2, &mut Rng::new(5)).unwrap();
        let x = cholesky_solve(&l, &b).unwrap();
        assert_close(&spd.mm(&x), &b, 1e-10);
        assert!(cholesky(&Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap()).is_err());

        let r = l.transpose();
        let rinv = inv_upper(&r).unwrap();
        assert_close(&r.mm(&rinv), &Matrix::identity(5), 1e-10);
    }

    #[test]
    fn lstsq_recovers_consistent_system() {
        let mut rng = Rng::new(6);
        let a: Matrix<f64> = gaussian_matrix(8, 3, &mut rng).unwrap();
        let x: Matrix<f64> = gaussian_matrix(3, 2, &mut rng).unwrap();
        let got = lstsq(&a, &a.mm(&x), 1e-12).unwrap().unwrap();
        assert_close(&got, &x, 1e-12);
        let dup = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        assert!(lstsq(&dup, &Matrix::zeros(3, 1), 1e-12).unwrap().is_none());
    }

    #[test]
    fn single_precision_path() {
        let a: Matrix<f32> = gaussian_matrix(6, 3, &mut Rng::new(8)).unwrap();
        let svd = thin_svd(&a).unwrap();
        let rebuilt = svd.u.mm(&Matrix::from_diag(&svd.sigma)).mm(&svd.vt);
        let err = rebuilt.sub(&a).unwrap().frobenius_norm();
        assert!(err < 1e-5 * svd.sigma[0], "{err}");
    }
}
