//! Convex baseline: `min ||Z||_{2,1}` subject to `A Z = Y`, solved by ADMM
//! with row-wise shrinkage.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
use crate::matrix::Matrix;
use crate::random::{gaussian_matrix, Rng};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineOptions {
    pub max_iter: usize,
    /// Stop once `||W_k - W_{k-1}||_F <= rel_tol * ||W_k||_F` ...
    pub rel_tol: f64,
    /// ... and `||A W - Y||_F <= residual_tol * ||Y||_F`.
    pub residual_tol: f64,
    /// Initial splitting penalty (data are rescaled so the least-norm
    /// solution has unit largest row norm).
    pub rho: f64,
    /// Rebalance `rho` every few iterations to keep the primal and dual
    /// residuals within a factor of 10 of each other.
    pub adaptive_rho: bool,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            rel_tol: 1e-10,
            residual_tol: 1e-8,
            rho: 1.0,
            adaptive_rho: true,
        }
    }
}

impl BaselineOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("residual_tol", self.residual_tol),
            ("rho", self.rho),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct L21Solution<T> {
    pub x: Matrix<T>,
    pub iterations: usize,
    /// Both stopping tests passed before `max_iter`.
    pub converged: bool,
    /// `||A X - Y||_F / ||Y||_F` (zero when `Y = 0`).
    pub rel_residual: f64,
}

/// Proximal map of `t ||.||_{2,1}`: each row `v` becomes
/// `max(0, 1 - t / ||v||) v`.
pub fn row_shrink<T: Real>(x: &Matrix<T>, t: T) -> Result<Matrix<T>> {
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!("shrink threshold must be >= 0, got {t}")));
    }
    let mut out = x.clone();
    shrink_in_place(&mut out, t);
    Ok(out)
}

fn shrink_in_place<T: Real>(x: &mut Matrix<T>, t: T) {
    for i in 0..x.rows() {
        let row = x.row_mut(i);
        let norm = row.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
        let factor = if norm > t { T::one() - t / norm } else { T::zero() };
        if factor != T::one() {
            for v in row.iter_mut() {
                *v = *v * factor;
            }
        }
    }
}

/// Affine projection onto `{Z : A Z = Y}` through a Cholesky factor of
/// `A A^T`.
struct Projector<'a, T> {
    a: &'a Matrix<T>,
    chol: Matrix<T>,
}

impl<'a, T: Real> Projector<'a, T> {
    fn new(a: &'a Matrix<T>) -> Result<Self> {
        let chol = cholesky(&a.mmt(a)).map_err(|_| {
            Error::NumericFailure("A A^T is not positive definite; A needs full row rank".into())
        })?;
        Ok(Self { a, chol })
    }

    /// `A^T (A A^T)^{-1} b`
    fn pinv_apply(&self, b: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.a.tmm(&cholesky_solve(&self.chol, b)?))
    }

    /// `x - A^+ (A x - y)`
    fn project(&self, x: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>> {
        let mut res = self.a.mm(x);
        res.axpy(-T::one(), y);
        let mut out = x.clone();
        out.axpy(-T::one(), &self.pinv_apply(&res)?);
        Ok(out)
    }
}

/// Minimizes `||Z||_{2,1}` subject to `A Z = Y` with scaled-form ADMM on the
/// split `Z = W`: affine projection for `Z`, row shrinkage for `W`.
/// Returns the shrunk iterate `W`, which is row-sparse; `converged` is
/// false when `max_iter` ran out first.
pub fn solve_l21<T: Real>(a: &Matrix<T>, y: &Matrix<T>, opts: &BaselineOptions) -> Result<L21Solution<T>> {
    opts.validate()?;
    if a.rows() != y.rows() {
        return Err(shape_err("solve_l21", a.shape(), y.shape()));
    }
    let (n, k) = (a.cols(), y.cols());
    let y_norm = y.frobenius_norm();
    if y_norm == T::zero() {
        return Ok(L21Solution {
            x: Matrix::zeros(n, k),
            iterations: 0,
            converged: true,
            rel_residual: 0.0,
        });
    }
    let proj = Projector::new(a)?;

    // rescale so the least-norm solution has unit largest row
    let z_ls = proj.pinv_apply(y)?;
    let scale = z_ls.row_norms().into_iter().fold(T::zero(), T::max);
    let ys = y.scale(T::one() / scale);
    let ys_norm = y_norm / scale;

    let rel_tol = T::lit(opts.rel_tol);
    let res_tol = T::lit(opts.residual_tol) * ys_norm;
    let mut rho = T::lit(opts.rho);
    let mut w = z_ls.scale(T::one() / scale);
    let mut u = Matrix::zeros(n, k);
    let mut iterations = 0;
    let mut converged = false;
    let mut feasibility = T::infinity();

    while iterations < opts.max_iter {
        iterations += 1;
        let z = proj.project(&w.sub(&u)?, &ys)?;
        let w_prev = std::mem::replace(&mut w, z.add(&u)?);
        shrink_in_place(&mut w, T::one() / rho);
        let primal = z.sub(&w)?;
        u.axpy(T::one(), &primal);
        if !w.is_finite() {
            return Err(Error::NumericFailure("non-finite baseline iterate".into()));
        }

        let r_norm = primal.frobenius_norm();
        let change = w.sub(&w_prev)?.frobenius_norm();
        if change <= rel_tol * w.frobenius_norm() {
            // A z = y, so A w - y = -A (z - w)
            feasibility = proj.a.mm(&primal).frobenius_norm();
            if feasibility <= res_tol {
                converged = true;
                break;
            }
        }
        if opts.adaptive_rho && iterations % 10 == 0 {
            let s_norm = rho * change;
            let ten = T::lit(10.0);
            if r_norm > ten * s_norm {
                rho = rho * T::lit(2.0);
                u = u.scale(T::lit(0.5));
            } else if s_norm > ten * r_norm {
                rho = rho * T::lit(0.5);
                u = u.scale(T::lit(2.0));
            }
        }
    }
    if !converged {
        let mut res = a.mm(&w);
        res.axpy(-T::one(), &ys);
        feasibility = res.frobenius_norm();
    }
    Ok(L21Solution {
        x: w.scale(scale),
        iterations,
        converged,
        rel_residual: (feasibility / ys_norm).as_f64(),
    })
}

/// [`solve_l21`] on a reduced problem `(A, V)`; lift with `X = W U`.
///
/// `||W U||_{2,1} = ||W||_{2,1}` when `U` has orthonormal rows, so on
/// `Y = V U` this solves the same convex program in `r` instead of `K`
/// columns.
pub fn solve_l21_reduced<T: Real>(a: &Matrix<T>, v: &Matrix<T>, opts: &BaselineOptions) -> Result<L21Solution<T>> {
    solve_l21(a, v, opts)
}

/// Single-vector basis pursuit `min ||x||_1` s.t. `A x = y` as a linear
/// program (split `x = p - q`, `p, q >= 0`). Reference solver for checking
/// the one-column case of [`solve_l21`].
pub fn basis_pursuit_l1(a: &Matrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = a.shape();
    if y.len() != m {
        return Err(shape_err("basis_pursuit_l1", a.shape(), (y.len(), 1)));
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let pos: Vec<_> = (0..n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let neg: Vec<_> = (0..n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for (i, &yi) in y.iter().enumerate() {
        let mut expr = Vec::with_capacity(2 * n);
        for j in 0..n {
            let c = a[(i, j)];
            if c != 0.0 {
                expr.push((pos[j], c));
                expr.push((neg[j], -c));
            }
        }
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, yi);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::NumericFailure(format!("basis pursuit LP: {e}")))?;
    Ok((0..n).map(|j| sol[pos[j]] - sol[neg[j]]).collect())
}

/// An instance on which l2,1 minimization fails at any rank.
///
/// `A` is `(n - 1) x n` with kernel spanned by `h`, where `h` is
/// `(1, -1, 1, 1)` on the support `{0, 1, 2, 3}` and `1 / (n - 4)` elsewhere,
/// so `||h_I||_1 = 4 > 1 = ||h_{I^c}||_1`. The rows of the returned `X`
/// (`n x k`, rank `min(r, 4, k)`) point close to `sign(h_i) e_0`, which makes
/// `X - h e_0^T` strictly cheaper in l2,1 norm. Requires `n >= 6`, `k >= 1`.
pub fn rank_blindness_witness<T: Real>(n: usize, k: usize, r: usize, seed: u64) -> Result<(Matrix<T>, Matrix<T>)> {
    if n < 6 || k == 0 || r == 0 {
        return Err(Error::InvalidArgument("witness needs n >= 6, k >= 1, r >= 1".into()));
    }
    let mut h = vec![T::lit(1.0 / (n - 4) as f64); n];
    h[..4].copy_from_slice(&[T::one(), -T::one(), T::one(), T::one()]);
    let hh: T = h.iter().map(|&v| v * v).sum();
    let proj = Matrix::from_fn(n, n, |i, j| {
        let id = if i == j { T::one() } else { T::zero() };
        id - h[i] * h[j] / hh
    });
    let b: Matrix<T> = gaussian_matrix(n - 1, n, &mut Rng::new(seed))?;
    let a = b.matmul(&proj)?;
    let rank = r.min(4).min(k);
    let mut x = Matrix::zeros(n, k);
    for i in 0..4 {
        let sign = h[i].signum();
        x[(i, 0)] = sign;
        // rows 1..rank pick up distinct small tilts so rank(X) = rank
        if i > 0 && i < rank {
            x[(i, i)] = sign * T::lit(0.2);
        }
    }
    Ok((a, x))
}
