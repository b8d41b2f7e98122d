use crate::error::{shape_err, Error, Result};
use crate::linalg::{cholesky, cholesky_solve, inv_upper, singular_values, thin_qr, Qr};
use crate::matrix::Matrix;
use crate::penalty::{row_weight, smoothed_from_row_norms, ObjectiveParams, WeightMode};
use crate::scalar::Real;

/// A smooth cost on the open set of full-column-rank `N x r` matrices.
///
/// `value` and `gradient` return [`Error::RankDeficient`] for points the
/// objective considers outside its domain; the line search treats that as
/// a rejected trial step.
pub trait Objective<T: Real> {
    fn value(&self, z: &Matrix<T>) -> Result<T>;

    fn gradient(&self, z: &Matrix<T>) -> Result<Matrix<T>>;

    fn value_and_gradient(&self, z: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        Ok((self.value(z)?, self.gradient(z)?))
    }

    /// Typical gradient magnitude, used to turn
    /// [`SolverOptions::grad_floor`](super::SolverOptions::grad_floor) into
    /// an absolute threshold.
    fn gradient_scale(&self) -> T {
        T::one()
    }

    /// Preconditioned gradient `P^{-1} g` for an approximate Hessian `P`
    /// at `z`; the identity by default.
    fn precondition(&self, _z: &Matrix<T>, g: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(g.clone())
    }

    /// Restriction `t -> f(z + t d)`; implementors may precompute
    /// direction-dependent terms.
    fn along<'a>(&'a self, z: &'a Matrix<T>, d: &'a Matrix<T>) -> Box<dyn Fn(T) -> Result<T> + 'a> {
        Box::new(move |t| self.value(&z.plus_scaled(t, d)))
    }
}

/// `F_delta(Z) + (lambda/2) ||A Z - V||_F^2` evaluated through a thin QR
/// `Z = Q R`.
///
/// The rows of `Q` have the same norms as the rows of the orthogonal
/// factor (the two differ by an `r x r` rotation), and `U L^{-1} V` from
/// the SVD of `Z` equals `Q R^{-T}`, so the penalty gradient is
/// `(I - Q Q^T) D_delta Q R^{-T}`. This avoids an SVD per evaluation.
pub struct SmoothedObjective<'a, T> {
    a: &'a Matrix<T>,
    v: &'a Matrix<T>,
    params: ObjectiveParams<T>,
    rank_guard: T,
    /// `(scale, A A^T)` when preconditioning is enabled.
    precond: Option<(T, Matrix<T>)>,
}

impl<'a, T: Real> SmoothedObjective<'a, T> {
    pub fn new(a: &'a Matrix<T>, v: &'a Matrix<T>, params: ObjectiveParams<T>, rank_guard: T) -> Result<Self> {
        if a.rows() != v.rows() {
            return Err(shape_err("objective", a.shape(), v.shape()));
        }
        Ok(Self {
            a,
            v,
            params,
            rank_guard,
            precond: None,
        })
    }

    /// Enables [`Objective::precondition`] with
    /// `P = lambda A^T A + mu I`, `mu = scale * r / ||Z||_F^2`: the exact
    /// fidelity Hessian plus a multiple of the identity standing in for the
    /// penalty curvature, which falls off like `1 / ||Z||^2`.
    pub fn with_preconditioner(mut self, scale: T) -> Self {
        self.precond = Some((scale, self.a.mmt(self.a)));
        self
    }

    pub fn params(&self) -> &ObjectiveParams<T> {
        &self.params
    }

    fn check_shape(&self, z: &Matrix<T>) -> Result<()> {
        if z.rows() != self.a.cols() || z.cols() != self.v.cols() {
            return Err(shape_err(
                "objective point",
                z.shape(),
                (self.a.cols(), self.v.cols()),
            ));
        }
        Ok(())
    }

    /// QR of `z` plus `R^{-1}`, rejecting points past the rank guard.
    fn factor(&self, z: &Matrix<T>) -> Result<(Qr<T>, Matrix<T>)> {
        self.check_shape(z)?;
        if !z.is_finite() {
            return Err(Error::NumericFailure("non-finite iterate".into()));
        }
        let qr = thin_qr(z)?;
        let r = &qr.r;
        if (0..r.rows()).any(|i| r[(i, i)] == T::zero()) {
            return Err(Error::RankDeficient { ratio: 0.0 });
        }
        let rinv = inv_upper(r)?;
        // sigma_min / sigma_max >= 1 / (||R||_F ||R^{-1}||_F)
        let lower = T::one() / (r.frobenius_norm() * rinv.frobenius_norm());
        if !(lower >= self.rank_guard) {
            let sv = singular_values(r)?;
            let ratio = sv[sv.len() - 1] / sv[0];
            if !(ratio >= self.rank_guard) {
                return Err(Error::RankDeficient { ratio: ratio.as_f64() });
            }
        }
        Ok((qr, rinv))
    }

    fn penalty(&self, q: &Matrix<T>) -> T {
        smoothed_from_row_norms(&q.row_norms(), self.params.delta())
    }

    fn residual(&self, z: &Matrix<T>) -> Matrix<T> {
        let mut r = self.a.mm(z);
        r.axpy(-T::one(), self.v);
        r
    }

    fn half_lambda(&self) -> T {
        self.params.lambda() / T::lit(2.0)
    }

    fn penalty_gradient(&self, q: &Matrix<T>, rinv: &Matrix<T>) -> Matrix<T> {
        let mode = WeightMode::Huber(self.params.delta());
        let mut b = q.clone();
        for i in 0..b.rows() {
            let row = b.row_mut(i);
            let norm = row.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
            let w = row_weight(norm, mode);
            for x in row.iter_mut() {
                *x = *x * w;
            }
        }
        // C = D Q R^{-T}, then project out range(Q)
        let c = b.mmt(rinv);
        let mut g = c.clone();
        g.axpy(-T::one(), &q.mm(&q.tmm(&c)));
        g
    }
}

impl<T: Real> Objective<T> for SmoothedObjective<'_, T> {
    fn value(&self, z: &Matrix<T>) -> Result<T> {
        let (qr, _) = self.factor(z)?;
        let res = self.residual(z);
        Ok(self.penalty(&qr.q) + self.half_lambda() * res.frobenius_dot(&res))
    }

    fn gradient(&self, z: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.value_and_gradient(z)?.1)
    }

    fn value_and_gradient(&self, z: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        let (qr, rinv) = self.factor(z)?;
        let res = self.residual(z);
        let value = self.penalty(&qr.q) + self.half_lambda() * res.frobenius_dot(&res);
        let mut g = self.penalty_gradient(&qr.q, &rinv);
        g.axpy(self.params.lambda(), &self.a.tmm(&res));
        Ok((value, g))
    }

    /// `lambda ||A^T V||_F`, the fidelity gradient at `Z = 0`.
    fn gradient_scale(&self) -> T {
        self.params.lambda() * self.a.tmm(self.v).frobenius_norm()
    }

    fn precondition(&self, z: &Matrix<T>, g: &Matrix<T>) -> Result<Matrix<T>> {
        let Some((scale, aat)) = &self.precond else {
            return Ok(g.clone());
        };
        let zn = z.frobenius_norm();
        let mu = *scale * T::lit(z.cols() as f64) / (zn * zn);
        // (lambda A^T A + mu I)^{-1} g = (g - A^T (mu/lambda I + A A^T)^{-1} A g) / mu
        let mut gram = aat.clone();
        let shift = mu / self.params.lambda();
        for i in 0..gram.rows() {
            gram[(i, i)] = gram[(i, i)] + shift;
        }
        let l = cholesky(&gram)?;
        let inner = cholesky_solve(&l, &self.a.mm(g))?;
        let mut h = g.clone();
        h.axpy(-T::one(), &self.a.tmm(&inner));
        Ok(h.scale(T::one() / mu))
    }

    fn along<'b>(&'b self, z: &'b Matrix<T>, d: &'b Matrix<T>) -> Box<dyn Fn(T) -> Result<T> + 'b> {
        // ||R0 + t A d||^2 = c0 + 2 t c1 + t^2 c2
        let r0 = self.residual(z);
        let ad = self.a.mm(d);
        let c0 = r0.frobenius_dot(&r0);
        let c1 = r0.frobenius_dot(&ad);
        let c2 = ad.frobenius_dot(&ad);
        Box::new(move |t| {
            let zt = z.plus_scaled(t, d);
            let (qr, _) = self.factor(&zt)?;
            let fit = (c0 + T::lit(2.0) * t * c1 + t * t * c2).max(T::zero());
            Ok(self.penalty(&qr.q) + self.half_lambda() * fit)
        })
    }
}
