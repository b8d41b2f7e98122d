//! Orthogonal-factor penalties, their Huber smoothing, and closed-form
//! Euclidean gradients.
//!
//! For a full-column-rank `Z` (`N x r`) with compact SVD `Z = U L V`
//! (`U`: `N x r`, `L`: positive diagonal, `V`: `r x r` orthogonal), the
//! orthogonal factor is `Q = Z (Z^T Z)^{-1/2} = U V`. The penalty
//! `||Q||_{2,1}` depends only on the column space of `Z`, and its gradient
//! is
//!
//! ```text
//! (I_N - U U^T) D(Q) U L^{-1} V
//! ```
//!
//! where `D(Q)` is diagonal with `1 / ||Q[i,:]||` (0 on zero rows). The
//! Huber-smoothed version replaces `D` by `D_delta` with entries
//! `H'_delta(||Q[i,:]||) / ||Q[i,:]||`.
//!
//! Everything here goes through the SVD of `Z`; `Z^T Z` is never formed.

use crate::error::{shape_err, Error, Result};
use crate::linalg::{thin_svd, Svd};
use crate::matrix::Matrix;
use crate::norms::l21_norm;
use crate::scalar::Real;

/// Matrices with `sigma_min / sigma_max` below this are treated as rank
/// deficient.
pub const RANK_GUARD: f64 = 1e-10;

pub const DEFAULT_LAMBDA: f64 = 9.0;
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Weight `lambda` on the data term and Huber width `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveParams<T> {
    lambda: T,
    delta: T,
}

impl<T: Real> ObjectiveParams<T> {
    pub fn new(lambda: T, delta: T) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("delta", delta)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { lambda, delta })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn delta(&self) -> T {
        self.delta
    }
}

impl<T: Real> Default for ObjectiveParams<T> {
    fn default() -> Self {
        Self {
            lambda: T::lit(DEFAULT_LAMBDA),
            delta: T::lit(DEFAULT_DELTA),
        }
    }
}

/// Which row weighting to build in [`diag_weights`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightMode<T> {
    /// `1 / ||row||`, zero on zero rows.
    Exact,
    /// `H'_delta(||row||) / ||row||`, zero on zero rows.
    Huber(T),
    /// As `Huber`, but zero rows get the limit value `1 / delta`.
    HuberContinuous(T),
}

/// Diagonal of `D(Q)` or `D_delta(Q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalWeights<T>(pub Vec<T>);

impl<T: Real> DiagonalWeights<T> {
    pub fn values(&self) -> &[T] {
        &self.0
    }

    /// `diag(w) * m`.
    pub fn scale_rows(&self, m: &Matrix<T>) -> Matrix<T> {
        let mut out = m.clone();
        for (i, &w) in self.0.iter().enumerate() {
            for v in out.row_mut(i) {
                *v = *v * w;
            }
        }
        out
    }
}

/// Row weight for a single row norm; shared with the solver's fast path.
#[inline]
pub(crate) fn row_weight<T: Real>(norm: T, mode: WeightMode<T>) -> T {
    match mode {
        WeightMode::Exact => {
            if norm > T::zero() {
                T::one() / norm
            } else {
                T::zero()
            }
        }
        WeightMode::Huber(delta) => {
            if norm > T::zero() {
                huber_derivative(norm, delta) / norm
            } else {
                T::zero()
            }
        }
        WeightMode::HuberContinuous(delta) => {
            if norm > T::zero() {
                huber_derivative(norm, delta) / norm
            } else {
                T::one() / delta
            }
        }
    }
}

pub fn diag_weights<T: Real>(q: &Matrix<T>, mode: WeightMode<T>) -> Result<DiagonalWeights<T>> {
    if let WeightMode::Huber(d) | WeightMode::HuberContinuous(d) = mode {
        if !(d > T::zero()) {
            return Err(Error::InvalidArgument("Huber weights need delta > 0".into()));
        }
    }
    Ok(DiagonalWeights(
        q.row_norms().into_iter().map(|n| row_weight(n, mode)).collect(),
    ))
}

/// Compact SVD of a full-column-rank `Z`, guarded against rank deficiency.
fn guarded_svd<T: Real>(z: &Matrix<T>) -> Result<Svd<T>> {
    if z.rows() < z.cols() || z.cols() == 0 {
        return Err(Error::InvalidArgument(format!(
            "expected a tall N x r matrix with r >= 1, got {}x{}",
            z.rows(),
            z.cols()
        )));
    }
    let svd = thin_svd(z)?;
    let ratio = svd.cond_ratio();
    if !(ratio >= T::lit(RANK_GUARD)) {
        return Err(Error::RankDeficient {
            ratio: ratio.as_f64(),
        });
    }
    Ok(svd)
}

/// `Q = Z (Z^T Z)^{-1/2}`, computed as `U V` from the compact SVD.
pub fn orthogonal_factor<T: Real>(z: &Matrix<T>) -> Result<Matrix<T>> {
    let svd = guarded_svd(z)?;
    Ok(svd.u.mm(&svd.vt))
}

/// `||Q||_{2,1}` for the orthogonal factor `Q` of `Z`.
pub fn exact_penalty<T: Real>(z: &Matrix<T>) -> Result<T> {
    Ok(l21_norm(&orthogonal_factor(z)?))
}

/// Huber function: `x - delta/2` for `x >= delta`, `x^2 / (2 delta)` below.
pub fn huber<T: Real>(x: T, delta: T) -> Result<T> {
    if x < T::zero() || x.is_nan() {
        return Err(Error::InvalidArgument(format!("huber argument must be >= 0, got {x}")));
    }
    if !(delta > T::zero()) {
        return Err(Error::InvalidArgument("huber delta must be > 0".into()));
    }
    Ok(huber_value(x, delta))
}

#[inline]
pub(crate) fn huber_value<T: Real>(x: T, delta: T) -> T {
    if x >= delta {
        x - delta / T::lit(2.0)
    } else {
        x * x / (T::lit(2.0) * delta)
    }
}

#[inline]
pub fn huber_derivative<T: Real>(x: T, delta: T) -> T {
    if x >= delta {
        T::one()
    } else {
        x / delta
    }
}

/// `F_delta(Z) = sum_n [H_delta(||Q[n,:]||) + delta/2]`.
pub fn smoothed_penalty<T: Real>(z: &Matrix<T>, delta: T) -> Result<T> {
    if !(delta > T::zero()) {
        return Err(Error::InvalidArgument("delta must be > 0".into()));
    }
    let q = orthogonal_factor(z)?;
    Ok(smoothed_from_row_norms(&q.row_norms(), delta))
}

#[inline]
pub(crate) fn smoothed_from_row_norms<T: Real>(norms: &[T], delta: T) -> T {
    let half = delta / T::lit(2.0);
    norms.iter().map(|&n| huber_value(n, delta) + half).sum()
}

fn check_fidelity_shapes<T: Real>(z: &Matrix<T>, a: &Matrix<T>, v: &Matrix<T>) -> Result<()> {
    if a.cols() != z.rows() {
        return Err(shape_err("A * Z", a.shape(), z.shape()));
    }
    if a.rows() != v.rows() || z.cols() != v.cols() {
        return Err(shape_err("A Z - V", (a.rows(), z.cols()), v.shape()));
    }
    Ok(())
}

/// `F_delta(Z) + (lambda/2) ||A Z - V||_F^2`.
pub fn objective<T: Real>(
    z: &Matrix<T>,
    a: &Matrix<T>,
    v: &Matrix<T>,
    params: &ObjectiveParams<T>,
) -> Result<T> {
    check_fidelity_shapes(z, a, v)?;
    let resid = a.mm(z).sub(v)?;
    let fit = resid.frobenius_dot(&resid);
    Ok(smoothed_penalty(z, params.delta)? + params.lambda / T::lit(2.0) * fit)
}

/// `A^T (A Z - V)`: the gradient of `(1/2) ||A Z - V||_F^2`.
pub fn grad_fidelity<T: Real>(z: &Matrix<T>, a: &Matrix<T>, v: &Matrix<T>) -> Result<Matrix<T>> {
    check_fidelity_shapes(z, a, v)?;
    Ok(a.tmm(&a.mm(z).sub(v)?))
}

/// `(I - U U^T) D U L^{-1} V` for the given row weighting.
fn penalty_gradient<T: Real>(z: &Matrix<T>, mode: WeightMode<T>) -> Result<Matrix<T>> {
    let svd = guarded_svd(z)?;
    let q = svd.u.mm(&svd.vt);
    let weights = diag_weights(&q, mode)?;
    // U L^{-1} V
    let mut u_scaled = svd.u.clone();
    for i in 0..u_scaled.rows() {
        for (x, &s) in u_scaled.row_mut(i).iter_mut().zip(&svd.sigma) {
            *x = *x / s;
        }
    }
    let b = weights.scale_rows(&u_scaled.mm(&svd.vt));
    let proj = svd.u.mm(&svd.u.tmm(&b));
    b.sub(&proj)
}

/// Gradient of [`exact_penalty`].
pub fn grad_exact_penalty<T: Real>(z: &Matrix<T>) -> Result<Matrix<T>> {
    penalty_gradient(z, WeightMode::Exact)
}

/// Gradient of [`smoothed_penalty`].
pub fn grad_smoothed_penalty<T: Real>(z: &Matrix<T>, delta: T) -> Result<Matrix<T>> {
    if !(delta > T::zero()) {
        return Err(Error::InvalidArgument("delta must be > 0".into()));
    }
    penalty_gradient(z, WeightMode::Huber(delta))
}

/// Gradient of [`objective`].
pub fn grad_objective<T: Real>(
    z: &Matrix<T>,
    a: &Matrix<T>,
    v: &Matrix<T>,
    params: &ObjectiveParams<T>,
) -> Result<Matrix<T>> {
    let mut g = grad_smoothed_penalty(z, params.delta)?;
    g.axpy(params.lambda, &grad_fidelity(z, a, v)?);
    Ok(g)
}

/// Default central-difference step `1e-6 * max(1, ||Z||_F)`.
pub fn default_fd_step<T: Real>(z: &Matrix<T>) -> T {
    T::lit(1e-6) * z.frobenius_norm().max(T::one())
}

/// Central differences `(f(Z + h E_ij) - f(Z - h E_ij)) / 2h` per entry.
pub fn finite_diff_grad<T: Real, F>(f: F, z: &Matrix<T>, h: T) -> Result<Matrix<T>>
where
    F: Fn(&Matrix<T>) -> Result<T>,
{
    if !(h > T::zero()) {
        return Err(Error::InvalidArgument("finite-difference step must be > 0".into()));
    }
    let mut g = Matrix::zeros(z.rows(), z.cols());
    let mut probe = z.clone();
    for i in 0..z.rows() {
        for j in 0..z.cols() {
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + h;
            let fp = f(&probe)?;
            probe[(i, j)] = orig - h;
            let fm = f(&probe)?;
            probe[(i, j)] = orig;
            g[(i, j)] = (fp - fm) / (T::lit(2.0) * h);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, random_row_sparse, Rng};

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    fn rel(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
        a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(1e-300)
    }

    fn random_orthogonal(r: usize, rng: &mut Rng) -> Matrix<f64> {
        let g: Matrix<f64> = gaussian_matrix(r, r, rng).unwrap();
        crate::linalg::thin_qr(&g).unwrap().q
    }

    #[test]
    fn params_must_be_positive() {
        assert!(ObjectiveParams::new(0.0, 1e-3).is_err());
        assert!(ObjectiveParams::new(9.0, -1.0).is_err());
        assert!(ObjectiveParams::new(f64::INFINITY, 1.0).is_err());
        let p = ObjectiveParams::<f64>::default();
        assert_eq!((p.lambda(), p.delta()), (9.0, 1e-3));
    }

    #[test]
    fn orthogonal_factor_examples() {
        let s = 0.5f64.sqrt();
        let z = m(&[&[s, s], &[s, -s], &[0.0, 0.0]]);
        assert!(rel(&orthogonal_factor(&z).unwrap(), &z) < 1e-14);

        let q = orthogonal_factor(&m(&[&[3.0], &[0.0]])).unwrap();
        assert!(rel(&q, &m(&[&[1.0], &[0.0]])) < 1e-15);

        let z = m(&[&[1.0, 1.0], &[1.0, -1.0]]);
        assert!(rel(&orthogonal_factor(&z).unwrap(), &z.scale(s)) < 1e-14);
    }

    #[test]
    fn rank_deficiency_is_reported_with_ratio() {
        let z = m(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]);
        match orthogonal_factor(&z) {
            Err(Error::RankDeficient { ratio }) => assert!(ratio < 1e-10),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        assert!(exact_penalty(&z).is_err());
        assert!(grad_exact_penalty(&z).is_err());
    }

    #[test]
    fn exact_penalty_examples() {
        // s-row-sparse, orthonormal columns, r = s  ->  s
        let mut rng = Rng::new(3);
        let rot = random_orthogonal(3, &mut rng);
        let mut z = Matrix::zeros(7, 3);
        for (k, &i) in [1usize, 4, 6].iter().enumerate() {
            z.row_mut(i).copy_from_slice(rot.row(k));
        }
        assert!((exact_penalty(&z).unwrap() - 3.0).abs() < 1e-13);

        // r = 1: l1 / l2
        let v = exact_penalty(&m(&[&[2.0], &[1.0]])).unwrap();
        assert!((v - 3.0 / 5f64.sqrt()).abs() < 1e-14);
        assert!((v - 1.3416).abs() < 1e-4);

        let g: Matrix<f64> = gaussian_matrix(6, 2, &mut rng).unwrap();
        for c in [-4.0, 1e-3, 7.5] {
            let a = exact_penalty(&g).unwrap();
            assert!((exact_penalty(&g.scale(c)).unwrap() - a).abs() < 1e-13);
        }
    }

    #[test]
    fn huber_examples() {
        assert_eq!(huber(0.0, 0.3).unwrap(), 0.0);
        assert!((huber(0.6f64, 0.3).unwrap() - 0.45).abs() < 1e-15);
        assert!((huber(0.15f64, 0.3).unwrap() - 0.0375).abs() < 1e-15);
        assert!(huber(-1e-3, 0.3).is_err());
        assert!(huber(1.0, 0.0).is_err());
    }

    #[test]
    fn smoothed_penalty_on_sparse_orthonormal() {
        let mut z = Matrix::zeros(10, 2);
        z[(2, 0)] = 1.0;
        z[(5, 1)] = 1.0;
        for delta in [1e-3, 0.3, 1.0] {
            let want = 2.0 + 8.0 * delta / 2.0;
            assert!((smoothed_penalty::<f64>(&z, delta).unwrap() - want).abs() < 1e-13);
        }
    }

    #[test]
    fn objective_terms() {
        let mut rng = Rng::new(8);
        let a: Matrix<f64> = gaussian_matrix(5, 9, &mut rng).unwrap();
        let w: Matrix<f64> = random_row_sparse(9, 2, 3, &mut rng).unwrap();
        let v = a.mm(&w);
        let p = ObjectiveParams::new(9.0, 1e-3).unwrap();
        let exact_fit = objective(&w, &a, &v, &p).unwrap();
        assert!((exact_fit - smoothed_penalty(&w, 1e-3).unwrap()).abs() < 1e-12);

        let z: Matrix<f64> = gaussian_matrix(9, 2, &mut rng).unwrap();
        let r = a.mm(&z).sub(&v).unwrap();
        let fit = 0.5 * r.frobenius_dot(&r);
        let p2 = ObjectiveParams::new(18.0, 1e-3).unwrap();
        let diff = objective(&z, &a, &v, &p2).unwrap() - objective(&z, &a, &v, &p).unwrap();
        assert!((diff - 9.0 * fit).abs() < 1e-10 * fit.max(1.0));
        assert!(objective(&z, &a, &v.transpose(), &p).is_err());
    }

    #[test]
    fn weight_examples() {
        let q = m(&[&[3.0, 4.0], &[0.0, 0.0]]);
        assert_eq!(diag_weights(&q, WeightMode::Exact).unwrap().0, vec![0.2, 0.0]);
        assert_eq!(diag_weights(&q, WeightMode::Huber(0.3)).unwrap().0, vec![0.2, 0.0]);
        let cont = diag_weights(&q, WeightMode::HuberContinuous(0.3)).unwrap().0;
        assert!((cont[1] - 1.0 / 0.3).abs() < 1e-15);

        let small = m(&[&[0.15, 0.0]]);
        let w = diag_weights(&small, WeightMode::Huber(0.3)).unwrap().0[0];
        assert!((w - 1.0 / 0.3).abs() < 1e-12);
        assert!((w - 3.3333).abs() < 1e-4);
        assert!(diag_weights(&small, WeightMode::Huber(0.0)).is_err());
    }

    #[test]
    fn fidelity_gradient_examples() {
        let mut rng = Rng::new(12);
        let a: Matrix<f64> = gaussian_matrix(4, 6, &mut rng).unwrap();
        let z: Matrix<f64> = gaussian_matrix(6, 2, &mut rng).unwrap();
        let v = a.mm(&z);
        assert!(grad_fidelity(&z, &a, &v).unwrap().max_abs() < 1e-12);
        let eye = Matrix::identity(6);
        assert_eq!(grad_fidelity(&z, &eye, &Matrix::zeros(6, 2)).unwrap(), z);

        let v2: Matrix<f64> = gaussian_matrix(4, 2, &mut rng).unwrap();
        let f = |x: &Matrix<f64>| {
            let r = a.mm(x).sub(&v2)?;
            Ok(0.5 * r.frobenius_dot(&r))
        };
        let fd = finite_diff_grad(f, &z, default_fd_step(&z)).unwrap();
        assert!(rel(&fd, &grad_fidelity(&z, &a, &v2).unwrap()) < 1e-6);
    }

    #[test]
    fn exact_gradient_hand_cases() {
        let g = grad_exact_penalty(&m(&[&[1.0], &[0.0]])).unwrap();
        assert!(g.max_abs() < 1e-15);

        let g = grad_exact_penalty(&m(&[&[2.0], &[1.0]])).unwrap();
        let c = 1.0 / (5.0 * 5f64.sqrt());
        assert!((g[(0, 0)] + c).abs() < 1e-14);
        assert!((g[(1, 0)] - 2.0 * c).abs() < 1e-14);
        assert!((g[(0, 0)] + 0.08944).abs() < 1e-5 && (g[(1, 0)] - 0.17889).abs() < 1e-5);
    }

    #[test]
    fn finite_diff_exactness() {
        let mut rng = Rng::new(5);
        let z: Matrix<f64> = gaussian_matrix(4, 3, &mut rng).unwrap();
        let gm: Matrix<f64> = gaussian_matrix(4, 3, &mut rng).unwrap();
        let quad = finite_diff_grad(|x| Ok(0.5 * x.frobenius_dot(x)), &z, 1e-4).unwrap();
        assert!(rel(&quad, &z) < 1e-10);
        let lin = finite_diff_grad(|x| Ok(gm.frobenius_dot(x)), &z, 1e-3).unwrap();
        assert!(rel(&lin, &gm) < 1e-11);
        assert!(finite_diff_grad(|x| Ok(x[(0, 0)]), &z, 0.0).is_err());
        let failing = finite_diff_grad(
            |_: &Matrix<f64>| Err(Error::NumericFailure("boom".into())),
            &z,
            1e-3,
        );
        assert!(failing.is_err());
    }

    #[test]
    fn smoothed_gradient_matches_finite_differences() {
        let mut rng = Rng::new(31);
        for (n, r, delta) in [(6, 1, 0.3), (10, 3, 1e-1), (15, 4, 1e-3), (8, 2, 1e-3)] {
            let z: Matrix<f64> = gaussian_matrix(n, r, &mut rng).unwrap();
            let g = grad_smoothed_penalty(&z, delta).unwrap();
            let fd = finite_diff_grad(|x| smoothed_penalty(x, delta), &z, default_fd_step(&z)).unwrap();
            assert!(rel(&fd, &g) < 1e-5, "n={n} r={r} delta={delta}: {}", rel(&fd, &g));
            // tangency
            assert!(z.tmm(&g).max_abs() < 1e-10);
        }
    }

    #[test]
    fn smoothed_gradient_equals_exact_above_delta() {
        let mut rng = Rng::new(40);
        let z: Matrix<f64> = gaussian_matrix(5, 3, &mut rng).unwrap();
        let q = orthogonal_factor(&z).unwrap();
        let min_norm = q.row_norms().into_iter().fold(f64::INFINITY, f64::min);
        let delta = 0.5 * min_norm;
        let ge = grad_exact_penalty(&z).unwrap();
        let gs = grad_smoothed_penalty(&z, delta).unwrap();
        assert!(ge.sub(&gs).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn objective_gradient_linear_in_lambda() {
        let mut rng = Rng::new(41);
        let a: Matrix<f64> = gaussian_matrix(5, 8, &mut rng).unwrap();
        let v: Matrix<f64> = gaussian_matrix(5, 2, &mut rng).unwrap();
        let z: Matrix<f64> = gaussian_matrix(8, 2, &mut rng).unwrap();
        let p1 = ObjectiveParams::new(1.0, 1e-2).unwrap();
        let p2 = ObjectiveParams::new(2.0, 1e-2).unwrap();
        let d = grad_objective(&z, &a, &v, &p2)
            .unwrap()
            .sub(&grad_objective(&z, &a, &v, &p1).unwrap())
            .unwrap();
        assert!(rel(&d, &grad_fidelity(&z, &a, &v).unwrap()) < 1e-12);

        let fd = finite_diff_grad(|x| objective(x, &a, &v, &p1), &z, default_fd_step(&z)).unwrap();
        assert!(rel(&fd, &grad_objective(&z, &a, &v, &p1).unwrap()) < 1e-5);
    }

    #[test]
    fn gradient_is_homogeneous_of_degree_minus_one() {
        let mut rng = Rng::new(42);
        let z: Matrix<f64> = gaussian_matrix(9, 3, &mut rng).unwrap();
        let g = grad_exact_penalty(&z).unwrap();
        for c in [1e-3, 2.0, 1e3] {
            let gc = grad_exact_penalty(&z.scale(c)).unwrap();
            assert!(rel(&gc.scale(c), &g) < 1e-10);
        }
    }

    #[test]
    fn basis_invariance() {
        let mut rng = Rng::new(43);
        let z: Matrix<f64> = gaussian_matrix(12, 4, &mut rng).unwrap();
        let e = exact_penalty(&z).unwrap();
        let s = smoothed_penalty(&z, 1e-1).unwrap();
        for _ in 0..10 {
            let rot = random_orthogonal(4, &mut rng);
            let zr = z.mm(&rot);
            assert!((exact_penalty(&zr).unwrap() - e).abs() < 1e-10);
            assert!((smoothed_penalty(&zr, 1e-1).unwrap() - s).abs() < 1e-10);
        }
    }
}
