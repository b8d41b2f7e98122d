use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

use super::objective::Objective;

/// Backtracking parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmijoParams {
    /// Sufficient-decrease constant `c`.
    pub c: f64,
    /// Shrink factor `beta` in `(0, 1)`.
    pub backtrack: f64,
    /// Trial steps after the initial one before giving up.
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AcceptedStep<T> {
    pub step: T,
    pub z_next: Matrix<T>,
    pub f_next: T,
    pub evaluations: usize,
}

#[derive(Clone, Debug)]
pub enum LineSearchOutcome<T> {
    Accepted(AcceptedStep<T>),
    /// No trial step passed. `rank_guard` is set when the last rejection
    /// came from the rank guard rather than insufficient decrease.
    Stalled { rank_guard: bool, evaluations: usize },
}

/// Largest `t = t0 * beta^k` with
/// `f(z + t d) <= f(z) + c t <g, d>` whose trial point passes the
/// objective's rank guard.
pub fn armijo_linesearch<T: Real, O: Objective<T> + ?Sized>(
    obj: &O,
    z: &Matrix<T>,
    f_z: T,
    direction: &Matrix<T>,
    grad: &Matrix<T>,
    initial_step: T,
    params: &ArmijoParams,
) -> Result<LineSearchOutcome<T>> {
    let slope = grad.frobenius_dot(direction);
    if !(slope < T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "line search needs a descent direction, <g, d> = {slope}"
        )));
    }
    if !f_z.is_finite() {
        return Err(Error::NumericFailure("non-finite objective at line search start".into()));
    }
    if !(initial_step > T::zero()) {
        return Err(Error::InvalidArgument("initial step must be positive".into()));
    }
    let line = obj.along(z, direction);
    let c = T::lit(params.c);
    let beta = T::lit(params.backtrack);
    let mut t = initial_step;
    let mut rank_guard = false;
    for k in 0..=params.max_backtracks {
        match line(t) {
            Ok(f_t) => {
                if !f_t.is_finite() {
                    return Err(Error::NumericFailure(format!("objective is {f_t} at step {t}")));
                }
                rank_guard = false;
                if f_t <= f_z + c * t * slope {
                    return Ok(LineSearchOutcome::Accepted(AcceptedStep {
                        step: t,
                        z_next: z.plus_scaled(t, direction),
                        f_next: f_t,
                        evaluations: k + 1,
                    }));
                }
            }
            Err(Error::RankDeficient { .. }) => rank_guard = true,
            Err(e) => return Err(e),
        }
        t = t * beta;
    }
    Ok(LineSearchOutcome::Stalled {
        rank_guard,
        evaluations: params.max_backtracks + 1,
    })
}
