//! Command-line front end. Exit codes: 0 success, 1 invalid input,
//! 2 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use jointspar::l21base::solve_l21;
use jointspar::mansolve::multi_start_solve;
use jointspar::penalty::{default_fd_step, exact_penalty, finite_diff_grad, grad_objective, objective, ObjectiveParams};
use jointspar::random::{gaussian_matrix, Rng};
use jointspar::reduction::{reduce_problem, DEFAULT_RANK_TOL};
use jointspar::verify::spark;
use jointspar::{Matrix64, ProblemInstance64};
use serde_json::json;

use crate::config::SweepConfig;
use crate::plot::write_svg;
use crate::records::{read_records_file, read_summary, write_summary};
use crate::summary::{compare, summarize};
use crate::sweep::{sweep, worker_count, SweepOptions};
use crate::BenchError;

/// Largest relative gradient mismatch accepted by `check-grad`.
pub const GRAD_CHECK_TOL: f64 = 1e-5;

#[derive(Parser, Debug)]
#[command(name = "jointspar", version, about = "Joint sparse recovery from multiple measurement vectors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct SolveArgs {
    #[arg(long, default_value_t = 9.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub grad_rel_tol: f64,
    #[arg(long, default_value_t = 5)]
    pub n_starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw A (m x n), row-sparse X (n x k, s non-zero rows) and Y = A X.
    Generate {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Receives A.csv, X.csv and Y.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Factor Y = V U and write V.csv and U.csv.
    Reduce {
        #[arg(long)]
        y: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Recover X from A and Y with the manifold method.
    Solve {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: SolveArgs,
    },
    /// Recover X from A and Y by l2,1 minimization.
    Baseline {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
    },
    /// Run the measurement-count sweep and write records, summary and figure.
    Sweep {
        /// `default`, `quick`, or a config file (JSON or key = value).
        #[arg(long, default_value = "default")]
        config: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_starts: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Overrides the worker-count environment variable.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Aggregate a records file into per-(k, method) medians.
    Summarize {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        success_tol: f64,
    },
    /// Draw the two-panel figure from a summary (and optionally the records).
    Plot {
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the closed-form gradient with central differences on a
    /// random instance; exits 0 iff the relative mismatch is below 1e-5.
    CheckGrad {
        #[arg(long, default_value_t = 12)]
        m: usize,
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 9.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
    /// Exhaustive spark of a small matrix.
    Spark {
        #[arg(long)]
        a: PathBuf,
    },
}

/// Parses `args` and runs the command; returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read_matrix(path: &Path) -> Result<Matrix64, BenchError> {
    Matrix64::read_csv(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn execute(cmd: Command) -> Result<i32, BenchError> {
    match cmd {
        Command::Generate { m, n, k, s, seed, out_dir } => {
            let inst = ProblemInstance64::generate(m, n, k, s, seed)
                .map_err(|e| BenchError::Config(e.to_string()))?;
            ensure_dir(&out_dir)?;
            inst.a.write_csv(out_dir.join("A.csv"))?;
            inst.x_true.write_csv(out_dir.join("X.csv"))?;
            inst.y.write_csv(out_dir.join("Y.csv"))?;
        }
        Command::Reduce { y, rank_tol, out_dir } => {
            let y = read_matrix(&y)?;
            let f = jointspar::reduction::factor_output(&y, rank_tol)?;
            ensure_dir(&out_dir)?;
            f.v.write_csv(out_dir.join("V.csv"))?;
            f.u.write_csv(out_dir.join("U.csv"))?;
            println!("{}", json!({ "rank": f.rank }));
        }
        Command::Solve { a, y, out, opts } => {
            let (a, y) = (read_matrix(&a)?, read_matrix(&y)?);
            let params = ObjectiveParams::new(opts.lambda, opts.delta)?;
            let solver = jointspar::mansolve::SolverOptions {
                max_iter: opts.max_iter,
                grad_rel_tol: opts.grad_rel_tol,
                n_starts: opts.n_starts,
                seed: opts.seed,
                ..Default::default()
            };
            solver.validate()?;
            let red = reduce_problem(&a, &y, DEFAULT_RANK_TOL)?;
            let res = multi_start_solve(&red.a, &red.v, &params, &solver)?;
            let x = red.lift(&res.z_hat)?;
            x.write_csv(&out)?;
            println!(
                "{}",
                json!({
                    "rank": red.rank,
                    "objective": res.final_objective(),
                    "penalty": exact_penalty(&res.z_hat)?,
                    "iterations": res.iterations,
                    "restarts": res.restarts_used,
                    "termination": res.termination.as_str(),
                })
            );
        }
        Command::Baseline { a, y, out, max_iter } => {
            let (a, y) = (read_matrix(&a)?, read_matrix(&y)?);
            let opts = jointspar::l21base::BaselineOptions { max_iter, ..Default::default() };
            let sol = solve_l21(&a, &y, &opts)?;
            sol.x.write_csv(&out)?;
            println!(
                "{}",
                json!({
                    "iterations": sol.iterations,
                    "converged": sol.converged,
                    "rel_residual": sol.rel_residual,
                })
            );
        }
        Command::Sweep { config, out_dir, trials, seed, n_starts, max_iter, workers, quiet } => {
            let mut cfg = SweepConfig::load(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = n_starts {
                cfg.n_starts = n;
            }
            if let Some(m) = max_iter {
                cfg.max_iter = m;
            }
            cfg.validate()?;
            let workers = match workers {
                Some(w) => w,
                None => worker_count()?,
            };
            ensure_dir(&out_dir)?;
            let records = sweep(&cfg, &out_dir.join("records.csv"), &SweepOptions { workers, progress: !quiet })?;
            let rows = summarize(&records, cfg.success_tol)?;
            write_summary(std::fs::File::create(out_dir.join("summary.csv"))?, &rows)?;
            write_svg(out_dir.join("figure.svg"), &rows, &records)?;
            let c = compare(&rows, cfg.success_tol);
            println!(
                "{}",
                json!({
                    "manifold_threshold": c.manifold_threshold,
                    "l21_threshold": c.l21_threshold,
                    "margin": c.margin,
                    "regressions": c.regressions,
                })
            );
        }
        Command::Summarize { records, out, success_tol } => {
            let records = read_records_file(&records)?;
            let rows = summarize(&records, success_tol)?;
            write_summary(std::fs::File::create(out)?, &rows)?;
        }
        Command::Plot { summary, records, out } => {
            let rows = read_summary(std::fs::File::open(summary)?)?;
            let records = match records {
                Some(p) => read_records_file(p)?,
                None => Vec::new(),
            };
            write_svg(out, &rows, &records)?;
        }
        Command::CheckGrad { m, n, r, seed, lambda, delta } => {
            if m == 0 || r == 0 || r > n {
                return Err(BenchError::Config("need m >= 1 and 1 <= r <= n".into()));
            }
            let params = ObjectiveParams::new(lambda, delta)?;
            let mut rng = Rng::new(seed);
            let a: Matrix64 = gaussian_matrix(m, n, &mut rng)?;
            let v: Matrix64 = gaussian_matrix(m, r, &mut rng)?;
            let z: Matrix64 = gaussian_matrix(n, r, &mut rng)?;
            let g = grad_objective(&z, &a, &v, &params)?;
            let fd = finite_diff_grad(|p| objective(p, &a, &v, &params), &z, default_fd_step(&z))?;
            let rel = g.sub(&fd)?.frobenius_norm() / g.frobenius_norm().max(f64::MIN_POSITIVE);
            println!("{}", json!({ "rel_mismatch": rel, "tolerance": GRAD_CHECK_TOL }));
            return Ok(if rel < GRAD_CHECK_TOL { 0 } else { 2 });
        }
        Command::Spark { a } => {
            let a = read_matrix(&a)?;
            let sp = spark(&a).map_err(|e| BenchError::Config(e.to_string()))?;
            println!("{}", json!({ "spark": sp }));
        }
    }
    Ok(0)
}
