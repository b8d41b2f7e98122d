//! Nonlinear conjugate gradients over full-column-rank `N x r` matrices.
//!
//! The feasible set is open in `R^{N x r}`, so iterates move by plain
//! addition under the Euclidean metric; a rank guard rejects trial points
//! whose `sigma_min / sigma_max` falls below [`SolverOptions::rank_guard`].
//! Directions follow preconditioned Polak-Ribiere with the `max(beta, 0)`
//! restart; steps come from Armijo backtracking.
//!
//! The penalty is invariant under `Z -> Z B` and its gradient is
//! orthogonal to `Z`, so every step along it grows `||Z||`. Along
//! `ker(A)` nothing pulls back, and from a start far out in that
//! direction the iterates drift toward a plateau at infinity. The default
//! start rule therefore begins at the least-norm solution `A^+ V` and
//! perturbs it for later starts.

mod linesearch;
mod objective;

pub use linesearch::{armijo_linesearch, AcceptedStep, ArmijoParams, LineSearchOutcome};
pub use objective::{Objective, SmoothedObjective};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
use crate::matrix::Matrix;
use crate::penalty::{exact_penalty, ObjectiveParams, RANK_GUARD};
use crate::random::{derive_seed, gaussian_matrix, Rng};
use crate::scalar::Real;

const BB_STEP_MIN: f64 = 1e-10;
const BB_STEP_MAX: f64 = 1e4;

/// Starting points for [`multi_start_solve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StartRule {
    /// Standard-normal `N x r` matrix.
    Gaussian,
    /// `A^+ V + spread * ||A^+ V||_F * G / ||G||_F` with `G` standard
    /// normal; start 0 is `A^+ V` itself.
    LeastNorm { spread: f64 },
}

/// How the first trial step of each line search is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialStep {
    /// `<s, s> / <s, y>` from the previous iteration, clipped to
    /// `[1e-10, 1e4]`; `1 / ||g||` on the first iteration.
    BarzilaiBorwein,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stop once `||g|| / ||g_0|| <= grad_rel_tol`.
    pub grad_rel_tol: f64,
    /// Also stop once `||g|| <= grad_floor * scale`, where `scale` is the
    /// objective's [`Objective::gradient_scale`]. Catches starts that are
    /// already stationary up to rounding, where no relative reduction is
    /// possible.
    pub grad_floor: f64,
    pub armijo: ArmijoParams,
    pub initial_step: InitialStep,
    pub n_starts: usize,
    pub rank_guard: f64,
    pub seed: u64,
    /// Multistart stops early once a start ends with
    /// `exact_penalty <= r + tol` and `||A Z - V|| <= tol ||V||`: the
    /// orthogonal-factor penalty is bounded below by `r`, with equality
    /// exactly on `r`-row-sparse points. `None` always runs every start.
    pub certificate_tol: Option<f64>,
    /// Scale of the identity term in the preconditioner
    /// (see [`SmoothedObjective::with_preconditioner`]); `None` runs plain CG.
    pub preconditioner: Option<f64>,
    pub start: StartRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            grad_rel_tol: 1e-8,
            grad_floor: 1e-12,
            armijo: ArmijoParams::default(),
            initial_step: InitialStep::Fixed(1.0),
            n_starts: 5,
            rank_guard: RANK_GUARD,
            seed: 0,
            certificate_tol: Some(1e-3),
            preconditioner: Some(300.0),
            start: StartRule::LeastNorm { spread: 0.3 },
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_rel_tol", self.grad_rel_tol),
            ("armijo c", self.armijo.c),
            ("rank_guard", self.rank_guard),
        ];
        if !(self.grad_floor >= 0.0 && self.grad_floor.is_finite()) {
            return Err(Error::InvalidArgument("grad_floor must be >= 0".into()));
        }
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.armijo.backtrack > 0.0 && self.armijo.backtrack < 1.0) {
            return Err(Error::InvalidArgument("backtrack factor must lie in (0, 1)".into()));
        }
        if self.max_iter == 0 || self.n_starts == 0 {
            return Err(Error::InvalidArgument("max_iter and n_starts must be >= 1".into()));
        }
        if let Some(p) = self.preconditioner {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidArgument("preconditioner scale must be positive".into()));
            }
        }
        if let StartRule::LeastNorm { spread } = self.start {
            if !(spread >= 0.0 && spread.is_finite()) {
                return Err(Error::InvalidArgument("start spread must be >= 0".into()));
            }
        }
        if let InitialStep::Fixed(t) = self.initial_step {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument("fixed initial step must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Termination {
    GradTol,
    MaxIter,
    LineSearchStall,
    RankGuardTripped,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::GradTol => "grad_tol",
            Termination::MaxIter => "max_iter",
            Termination::LineSearchStall => "line_search_stall",
            Termination::RankGuardTripped => "rank_guard_tripped",
        }
    }
}

/// Final state of one start, kept for multistart diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct StartSummary {
    pub seed: u64,
    pub objective: Option<f64>,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SolveResult<T> {
    pub z_hat: Matrix<T>,
    /// Objective at the start point and after every accepted step.
    pub objective_trace: Vec<T>,
    pub grad_norm_trace: Vec<T>,
    pub iterations: usize,
    /// Starts run beyond the first.
    pub restarts_used: usize,
    pub termination: Termination,
    pub starts: Vec<StartSummary>,
}

impl<T: Real> SolveResult<T> {
    pub fn final_objective(&self) -> T {
        *self.objective_trace.last().expect("trace holds the start point")
    }
}

fn step_seed(opts: &SolverOptions, g_norm: f64) -> f64 {
    match opts.initial_step {
        InitialStep::Fixed(t) => t,
        InitialStep::BarzilaiBorwein => (1.0 / g_norm).clamp(BB_STEP_MIN, BB_STEP_MAX),
    }
}

/// Polak-Ribiere+ CG with Armijo steps on an arbitrary [`Objective`].
pub fn minimize<T: Real, O: Objective<T> + ?Sized>(
    obj: &O,
    z0: &Matrix<T>,
    opts: &SolverOptions,
) -> Result<SolveResult<T>> {
    opts.validate()?;
    let (mut f, mut g) = match obj.value_and_gradient(z0) {
        Ok(fg) => fg,
        Err(Error::RankDeficient { ratio }) => {
            return Err(Error::InvalidArgument(format!(
                "starting point is rank deficient (sigma ratio {ratio:e})"
            )))
        }
        Err(e) => return Err(e),
    };
    if !f.is_finite() || !g.is_finite() {
        return Err(Error::NumericFailure("non-finite objective at the start point".into()));
    }
    let mut z = z0.clone();
    let mut g_norm = g.frobenius_norm();
    let g0_norm = g_norm;
    let tol = (T::lit(opts.grad_rel_tol) * g0_norm).max(T::lit(opts.grad_floor) * obj.gradient_scale());
    let mut objective_trace = vec![f];
    let mut grad_norm_trace = vec![g_norm];

    let mut h = obj.precondition(&z, &g)?;
    let mut d = h.scale(-T::one());
    let mut steepest = true;
    let mut t_init = T::lit(step_seed(opts, g_norm.as_f64()));
    let mut iterations = 0;
    let termination = loop {
        if g_norm <= tol {
            break Termination::GradTol;
        }
        if iterations >= opts.max_iter {
            break Termination::MaxIter;
        }
        if !(g.frobenius_dot(&d) < T::zero()) {
            d = h.scale(-T::one());
            steepest = true;
        }
        let step = match armijo_linesearch(obj, &z, f, &d, &g, t_init, &opts.armijo)? {
            LineSearchOutcome::Accepted(step) => step,
            LineSearchOutcome::Stalled { rank_guard, .. } => {
                if steepest {
                    break if rank_guard {
                        Termination::RankGuardTripped
                    } else {
                        Termination::LineSearchStall
                    };
                }
                // retry along the negative gradient
                d = h.scale(-T::one());
                steepest = true;
                t_init = T::lit(step_seed(opts, g_norm.as_f64()));
                continue;
            }
        };

        let g_next = obj.gradient(&step.z_next)?;
        if !g_next.is_finite() {
            return Err(Error::NumericFailure("non-finite gradient".into()));
        }
        let s = step.z_next.sub(&z)?;
        let y = g_next.sub(&g)?;

        let h_next = obj.precondition(&step.z_next, &g_next)?;
        let gh = g.frobenius_dot(&h);
        let beta = ((g_next.frobenius_dot(&h_next) - g_next.frobenius_dot(&h)) / gh).max(T::zero());
        let mut d_next = h_next.scale(-T::one());
        d_next.axpy(beta, &d);
        steepest = beta == T::zero();

        t_init = match opts.initial_step {
            InitialStep::Fixed(t) => T::lit(t),
            InitialStep::BarzilaiBorwein => {
                let sy = s.frobenius_dot(&y);
                let bb = if sy > T::zero() {
                    s.frobenius_dot(&s) / sy
                } else {
                    step.step * T::lit(2.0)
                };
                bb.max(T::lit(BB_STEP_MIN)).min(T::lit(BB_STEP_MAX))
            }
        };

        z = step.z_next;
        f = step.f_next;
        g = g_next;
        h = h_next;
        d = d_next;
        g_norm = g.frobenius_norm();
        iterations += 1;
        objective_trace.push(f);
        grad_norm_trace.push(g_norm);
    };

    Ok(SolveResult {
        z_hat: z,
        objective_trace,
        grad_norm_trace,
        iterations,
        restarts_used: 0,
        termination,
        starts: Vec::new(),
    })
}

/// Minimizes `F_delta(Z) + (lambda/2) ||A Z - V||_F^2` from `z0`.
pub fn cg_minimize<T: Real>(
    a: &Matrix<T>,
    v: &Matrix<T>,
    params: &ObjectiveParams<T>,
    z0: &Matrix<T>,
    opts: &SolverOptions,
) -> Result<SolveResult<T>> {
    if z0.shape() != (a.cols(), v.cols()) {
        return Err(shape_err("cg_minimize start", z0.shape(), (a.cols(), v.cols())));
    }
    let mut obj = SmoothedObjective::new(a, v, *params, T::lit(opts.rank_guard))?;
    if let Some(scale) = opts.preconditioner {
        obj = obj.with_preconditioner(T::lit(scale));
    }
    minimize(&obj, z0, opts)
}

/// Seed of the `index`-th start.
pub fn start_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, &[index as u64])
}

/// Least-norm solution `A^T (A A^T)^{-1} V`.
pub fn least_norm_solution<T: Real>(a: &Matrix<T>, v: &Matrix<T>) -> Result<Matrix<T>> {
    if a.rows() != v.rows() {
        return Err(shape_err("least_norm_solution", a.shape(), v.shape()));
    }
    let l = cholesky(&a.mmt(a))
        .map_err(|_| Error::NumericFailure("A A^T is singular; A needs full row rank".into()))?;
    Ok(a.tmm(&cholesky_solve(&l, v)?))
}

/// Starting point `index` under `rule`. `least_norm` must be
/// [`least_norm_solution`] for [`StartRule::LeastNorm`] and is ignored
/// otherwise.
pub fn start_point<T: Real>(
    rule: StartRule,
    least_norm: Option<&Matrix<T>>,
    shape: (usize, usize),
    base_seed: u64,
    index: usize,
) -> Result<Matrix<T>> {
    let mut rng = Rng::new(start_seed(base_seed, index));
    match rule {
        StartRule::Gaussian => gaussian_matrix(shape.0, shape.1, &mut rng),
        StartRule::LeastNorm { spread } => {
            let base = least_norm
                .ok_or_else(|| Error::InvalidArgument("least-norm start needs A^+ V".into()))?;
            if base.shape() != shape {
                return Err(shape_err("start_point", base.shape(), shape));
            }
            if index == 0 || spread == 0.0 {
                return Ok(base.clone());
            }
            let g: Matrix<T> = gaussian_matrix(shape.0, shape.1, &mut rng)?;
            let c = T::lit(spread) * base.frobenius_norm() / g.frobenius_norm();
            Ok(base.plus_scaled(c, &g))
        }
    }
}

/// `exact_penalty(z) <= r + tol` and `||A z - v|| <= tol ||v||`.
pub fn certifies_sparse_optimum<T: Real>(z: &Matrix<T>, a: &Matrix<T>, v: &Matrix<T>, tol: f64) -> bool {
    let r = z.cols() as f64;
    let Ok(pen) = exact_penalty(z) else {
        return false;
    };
    let Ok(res) = a.mm(z).sub(v) else {
        return false;
    };
    pen.as_f64() <= r + tol && res.frobenius_norm().as_f64() <= tol * v.frobenius_norm().as_f64()
}

/// Runs [`cg_minimize`] from up to `n_starts` starting points and
/// keeps the result with the smallest final objective (ties go to the
/// earlier start).
pub fn multi_start_solve<T: Real>(
    a: &Matrix<T>,
    v: &Matrix<T>,
    params: &ObjectiveParams<T>,
    opts: &SolverOptions,
) -> Result<SolveResult<T>> {
    opts.validate()?;
    if a.rows() != v.rows() {
        return Err(shape_err("multi_start_solve", a.shape(), v.shape()));
    }
    let (n, r) = (a.cols(), v.cols());
    let least_norm = match opts.start {
        StartRule::LeastNorm { .. } => Some(least_norm_solution(a, v)?),
        StartRule::Gaussian => None,
    };
    let mut best: Option<SolveResult<T>> = None;
    let mut starts = Vec::with_capacity(opts.n_starts);

    for index in 0..opts.n_starts {
        let seed = start_seed(opts.seed, index);
        let outcome = start_point(opts.start, least_norm.as_ref(), (n, r), opts.seed, index).and_then(|z0| cg_minimize(a, v, params, &z0, opts));
        match outcome {
            Ok(res) => {
                starts.push(StartSummary {
                    seed,
                    objective: Some(res.final_objective().as_f64()),
                    iterations: res.iterations,
                    termination: Some(res.termination),
                    error: None,
                });
                let certified = opts
                    .certificate_tol
                    .is_some_and(|tol| certifies_sparse_optimum(&res.z_hat, a, v, tol));
                if best
                    .as_ref()
                    .is_none_or(|b| res.final_objective() < b.final_objective())
                {
                    best = Some(res);
                }
                if certified {
                    break;
                }
            }
            Err(e) => starts.push(StartSummary {
                seed,
                objective: None,
                iterations: 0,
                termination: None,
                error: Some(e.to_string()),
            }),
        }
    }

    match best {
        Some(mut res) => {
            res.restarts_used = starts.len() - 1;
            res.starts = starts;
            Ok(res)
        }
        None => Err(Error::NumericFailure(format!(
            "all {} starts failed: {}",
            starts.len(),
            starts
                .iter()
                .filter_map(|s| s.error.as_deref())
                .collect::<Vec<_>>()
                .join("; ")
        ))),
    }
}
