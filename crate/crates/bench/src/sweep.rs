//! Running the sweep: one record per `(k, trial, method)` cell, streamed to
//! CSV in canonical order so an interrupted run can be resumed.

use std::collections::{BTreeMap, HashSet};
use std::fs::OpenOptions;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use jointspar::l21base::solve_l21;
use jointspar::mansolve::multi_start_solve;
use jointspar::norms::support_tol;
use jointspar::random::derive_seed;
use jointspar::reduction::{reduce_problem, DEFAULT_RANK_TOL};
use jointspar::verify::recovery_report;
use jointspar::{Matrix64, ProblemInstance64};
use rayon::prelude::*;

use crate::config::{Method, SweepConfig};
use crate::records::{read_records_file, record_writer, write_record, SweepRecord};
use crate::BenchError;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "JOINTSPAR_WORKERS";

// keeps instance seeds apart from cell seeds, which have three path entries
const INSTANCE_TAG: u64 = 0x696e_7374;

/// Seed of the instance for `trial`; the same `A_full, X_true` is used for
/// every `k`.
pub fn instance_seed(cfg: &SweepConfig, trial: usize) -> u64 {
    derive_seed(cfg.seed, &[INSTANCE_TAG, trial as u64])
}

/// Seed handed to the solver of one cell.
pub fn cell_seed(cfg: &SweepConfig, k_index: usize, trial: usize, method: Method) -> u64 {
    derive_seed(cfg.seed, &[k_index as u64, trial as u64, method.id()])
}

pub fn generate_instance(cfg: &SweepConfig, trial: usize) -> Result<ProblemInstance64, BenchError> {
    Ok(ProblemInstance64::generate(cfg.m_full, cfg.n, cfg.k, cfg.s, instance_seed(cfg, trial))?)
}

struct Solved {
    x: Matrix64,
    iterations: usize,
    restarts: usize,
}

fn solve_cell(cfg: &SweepConfig, a: &Matrix64, y: &Matrix64, method: Method, seed: u64) -> Result<Solved, BenchError> {
    match method {
        Method::Manifold => {
            let red = reduce_problem(a, y, DEFAULT_RANK_TOL)?;
            let res = multi_start_solve(&red.a, &red.v, &cfg.objective_params()?, &cfg.solver_options(seed))?;
            Ok(Solved {
                x: red.lift(&res.z_hat)?,
                iterations: res.iterations,
                restarts: res.restarts_used,
            })
        }
        Method::L21 => {
            let sol = solve_l21(a, y, &cfg.baseline_options())?;
            if !sol.converged {
                eprintln!("l21 did not converge (relative residual {:.2e})", sol.rel_residual);
            }
            Ok(Solved {
                x: sol.x,
                iterations: sol.iterations,
                restarts: 0,
            })
        }
    }
}

/// Solves one cell on a pre-generated instance. A solver error is recorded
/// as a failed trial (`rel_error = 1`) and reported on stderr.
pub fn run_cell(cfg: &SweepConfig, inst: &ProblemInstance64, k_index: usize, trial: usize, method: Method) -> SweepRecord {
    let k = cfg.k_grid[k_index];
    let seed = cell_seed(cfg, k_index, trial, method);
    let start = Instant::now();
    let outcome = inst.a.row_prefix(k).map_err(BenchError::from).and_then(|a| {
        let y = a.matmul(&inst.x_true)?;
        let solved = solve_cell(cfg, &a, &y, method, seed)?;
        let tol = support_tol(&inst.x_true, cfg.success_tol);
        let report = recovery_report(&solved.x, &inst.x_true, cfg.success_tol, tol)?;
        Ok((solved, report))
    });
    let wall_ms = start.elapsed().as_millis() as u64;
    let mut rec = SweepRecord {
        k,
        trial,
        method,
        rel_error: 1.0,
        support_match: false,
        iterations: 0,
        restarts: 0,
        wall_ms,
        seed,
    };
    match outcome {
        Ok((solved, report)) if report.rel_error.is_finite() => {
            rec.rel_error = report.rel_error;
            rec.support_match = report.support_match;
            rec.iterations = solved.iterations;
            rec.restarts = solved.restarts;
        }
        Ok(_) => eprintln!("k={k} trial={trial} method={}: non-finite error", method.as_str()),
        Err(e) => eprintln!("k={k} trial={trial} method={}: {e}", method.as_str()),
    }
    rec
}

/// Every method on one `(k, trial)` cell, in canonical method order.
pub fn run_trial(cfg: &SweepConfig, k: usize, trial: usize) -> Result<Vec<SweepRecord>, BenchError> {
    cfg.validate()?;
    let k_index = cfg
        .k_grid
        .iter()
        .position(|&g| g == k)
        .ok_or_else(|| BenchError::Config(format!("k = {k} is not in k_grid")))?;
    if trial >= cfg.trials {
        return Err(BenchError::Config(format!("trial {trial} >= trials {}", cfg.trials)));
    }
    let inst = generate_instance(cfg, trial)?;
    Ok(cfg
        .ordered_methods()
        .into_iter()
        .map(|m| run_cell(cfg, &inst, k_index, trial, m))
        .collect())
}

/// All cells in output order: k, then trial, then method.
pub fn canonical_cells(cfg: &SweepConfig) -> Vec<(usize, usize, Method)> {
    let methods = cfg.ordered_methods();
    let mut cells = Vec::new();
    for k_index in 0..cfg.k_grid.len() {
        for trial in 0..cfg.trials {
            for &m in &methods {
                cells.push((k_index, trial, m));
            }
        }
    }
    cells
}

/// Sidecar holding the configuration a records file was produced with.
pub fn config_sidecar(records: &Path) -> PathBuf {
    let mut name = records.as_os_str().to_owned();
    name.push(".config.json");
    PathBuf::from(name)
}

pub fn worker_count() -> Result<usize, BenchError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(BenchError::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub workers: usize,
    pub progress: bool,
}

/// Runs every cell missing from `records_path` and returns all records in
/// canonical order. Records already present (from an interrupted run with
/// the same configuration) are kept and not recomputed.
pub fn sweep(cfg: &SweepConfig, records_path: &Path, opts: &SweepOptions) -> Result<Vec<SweepRecord>, BenchError> {
    cfg.validate()?;
    if opts.workers == 0 {
        return Err(BenchError::Config("workers must be >= 1".into()));
    }
    let sidecar = config_sidecar(records_path);
    let existing = if records_path.exists() && std::fs::metadata(records_path)?.len() > 0 {
        let saved = std::fs::read_to_string(&sidecar).map_err(|_| {
            BenchError::Config(format!(
                "{} exists without {}; refusing to append",
                records_path.display(),
                sidecar.display()
            ))
        })?;
        let saved: SweepConfig =
            serde_json::from_str(&saved).map_err(|e| BenchError::Config(format!("{}: {e}", sidecar.display())))?;
        if &saved != cfg {
            return Err(BenchError::Config(format!(
                "{} was produced with a different configuration",
                records_path.display()
            )));
        }
        read_records_file(records_path)?
    } else {
        std::fs::write(&sidecar, cfg.to_json())?;
        Vec::new()
    };

    let done: HashSet<_> = existing.iter().map(SweepRecord::cell).collect();
    let todo: Vec<_> = canonical_cells(cfg)
        .into_iter()
        .filter(|&(ki, t, m)| !done.contains(&(cfg.k_grid[ki], t, m)))
        .collect();

    let mut all = existing;
    if !todo.is_empty() {
        let file = OpenOptions::new().create(true).append(true).open(records_path)?;
        let fresh = file.metadata()?.len() == 0;
        let mut writer = record_writer(BufWriter::new(file), fresh);
        all.extend(run_cells(cfg, &todo, opts, |rec| write_record(&mut writer, rec))?);
    }
    sort_canonical(cfg, &mut all);
    Ok(all)
}

/// Runs the sweep without touching the filesystem.
pub fn sweep_in_memory(cfg: &SweepConfig, opts: &SweepOptions) -> Result<Vec<SweepRecord>, BenchError> {
    cfg.validate()?;
    run_cells(cfg, &canonical_cells(cfg), opts, |_| Ok(()))
}

fn sort_canonical(cfg: &SweepConfig, records: &mut [SweepRecord]) {
    let k_pos = |k: usize| cfg.k_grid.iter().position(|&g| g == k).unwrap_or(usize::MAX);
    records.sort_by_key(|r| (k_pos(r.k), r.trial, r.method));
}

/// Computes `cells` on a worker pool and hands each record to `sink` in the
/// order of `cells`, whatever order they finish in.
fn run_cells(
    cfg: &SweepConfig,
    cells: &[(usize, usize, Method)],
    opts: &SweepOptions,
    mut sink: impl FnMut(&SweepRecord) -> Result<(), BenchError>,
) -> Result<Vec<SweepRecord>, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    let instances: BTreeMap<usize, ProblemInstance64> = {
        let trials: HashSet<usize> = cells.iter().map(|c| c.1).collect();
        trials
            .into_iter()
            .map(|t| generate_instance(cfg, t).map(|i| (t, i)))
            .collect::<Result<_, _>>()?
    };
    let cancel = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, SweepRecord)>();
    let total = cells.len();

    std::thread::scope(|scope| {
        let cancel = &cancel;
        let instances = &instances;
        scope.spawn(move || {
            pool.install(|| {
                cells.par_iter().enumerate().for_each_with(tx, |tx, (i, &(ki, trial, m))| {
                    if cancel.load(Ordering::Relaxed) {
                        return;
                    }
                    let rec = run_cell(cfg, &instances[&trial], ki, trial, m);
                    let _ = tx.send((i, rec));
                });
            });
        });

        let mut pending = BTreeMap::new();
        let mut out = Vec::with_capacity(total);
        for (i, rec) in rx {
            pending.insert(i, rec);
            while let Some(rec) = pending.remove(&out.len()) {
                if let Err(e) = sink(&rec) {
                    cancel.store(true, Ordering::Relaxed);
                    return Err(e);
                }
                if opts.progress {
                    eprintln!(
                        "[{}/{total}] k={} trial={} {} rel_error={:.3e} ({} ms)",
                        out.len() + 1,
                        rec.k,
                        rec.trial,
                        rec.method.as_str(),
                        rec.rel_error,
                        rec.wall_ms
                    );
                }
                out.push(rec);
            }
        }
        Ok(out)
    })
}
