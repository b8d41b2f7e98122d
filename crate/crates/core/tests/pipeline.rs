use jointspar::l21base::{solve_l21, BaselineOptions};
use jointspar::mansolve::{multi_start_solve, SolverOptions};
use jointspar::norms::{row_support, support_tol};
use jointspar::reduction::{reduce_problem, DEFAULT_RANK_TOL};
use jointspar::verify::{brute_force_l0, recovery_report};
use jointspar::{Matrix64, ObjectiveParams64, ProblemInstance, ProblemInstance64};

fn rel_err(a: &Matrix64, b: &Matrix64) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm()
}

#[test]
fn manifold_solution_agrees_with_the_l0_oracle() {
    for seed in [0u64, 2, 5, 7] {
        let inst = ProblemInstance64::generate(12, 20, 3, 3, seed).unwrap();
        let red = reduce_problem(&inst.a, &inst.y, DEFAULT_RANK_TOL).unwrap();
        let oracle = brute_force_l0(&red.a, &red.v, 3, 1e-10).unwrap().unwrap();
        let res = multi_start_solve(&red.a, &red.v, &ObjectiveParams64::default(), &SolverOptions::default()).unwrap();
        let x_hat = red.lift(&res.z_hat).unwrap();
        let tol = support_tol(&inst.x_true, 1e-3);
        assert_eq!(row_support(&x_hat, tol), oracle.support, "seed {seed}");
        assert!(rel_err(&x_hat, &red.lift(&oracle.w).unwrap()) < 1e-3, "seed {seed}");
    }
}

#[test]
fn manifold_needs_fewer_rows_than_l21() {
    // first 54 of 80 rows, s = 30 with rank 30: inside the manifold
    // method's success region, outside the convex relaxation's
    let inst = ProblemInstance64::generate(80, 300, 70, 30, 1).unwrap();
    let a = inst.a.row_prefix(54).unwrap();
    let y = a.matmul(&inst.x_true).unwrap();
    let red = reduce_problem(&a, &y, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(red.rank, 30);
    let res = multi_start_solve(&red.a, &red.v, &ObjectiveParams64::default(), &SolverOptions::default()).unwrap();
    let tol = support_tol(&inst.x_true, 1e-3);
    let manifold = recovery_report(&red.lift(&res.z_hat).unwrap(), &inst.x_true, 1e-3, tol).unwrap();
    let l21 = solve_l21(&a, &y, &BaselineOptions::default()).unwrap();
    let convex = recovery_report(&l21.x, &inst.x_true, 1e-3, tol).unwrap();
    assert!(manifold.success && manifold.support_match, "{manifold:?}");
    assert!(!convex.success, "{convex:?}");
}

#[test]
fn single_precision_pipeline() {
    let inst = ProblemInstance::<f32>::generate(16, 30, 4, 4, 3).unwrap();
    let red = reduce_problem(&inst.a, &inst.y, 1e-5).unwrap();
    assert_eq!(red.rank, 4);
    let opts = SolverOptions { grad_rel_tol: 1e-4, rank_guard: 1e-5, ..Default::default() };
    let res = multi_start_solve(&red.a, &red.v, &Default::default(), &opts).unwrap();
    let x_hat = red.lift(&res.z_hat).unwrap();
    let err = x_hat.sub(&inst.x_true).unwrap().frobenius_norm() / inst.x_true.frobenius_norm();
    assert!(err < 1e-2, "{err}");
}
