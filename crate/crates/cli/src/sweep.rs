use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use clap::Args;
use manifold_mtf::data::{load_dataset, MultiAspectDataset};
use manifold_mtf::solver;

use crate::cluster::{solver_config, SolverArgs};
use crate::grid::{parse_f64_list, parse_usize_list};
use crate::usage;

pub const SWEEP_HEADER: &str = "lambda,delta_ratio,p,seed,type,nmi,ac,iters,total_obj";

/// Caps the number of worker threads.
pub const THREADS_ENV: &str = "MANIFOLD_MTF_THREADS";

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Intra weights, e.g. `1,10`.
    #[arg(long, default_value = "10")]
    pub lambdas: String,
    /// Inter weights as fractions of lambda, e.g. `0.01,0.1,1`.
    #[arg(long, default_value = "0.1")]
    pub delta_ratios: String,
    /// Inter neighborhood sizes, e.g. `5:30:5`.
    #[arg(long, default_value = "5")]
    pub ps: String,
    /// Seeds, e.g. `0:4`.
    #[arg(long, default_value = "0")]
    pub seeds: String,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    lambda: f64,
    ratio: f64,
    p: usize,
    seed: u64,
}

/// Per labeled type: (nmi, ac); plus iterations and final objective.
#[derive(Debug, Clone)]
struct Outcome {
    metrics: Vec<(usize, f64, f64)>,
    iters: usize,
    total: f64,
}

fn run_cell(dataset: &MultiAspectDataset, solver_args: &SolverArgs, cell: Cell) -> Result<Outcome> {
    let config = solver_config(
        dataset,
        solver_args,
        cell.lambda,
        cell.ratio * cell.lambda,
        cell.p,
        cell.seed,
    )?;
    let solution = solver::cluster(dataset, &config)?;
    Ok(Outcome {
        metrics: solution
            .metrics
            .iter()
            .map(|(&h, m)| (h, m.nmi, m.accuracy))
            .collect(),
        iters: solution.report.iterations,
        total: solution.report.trace.last().expect("trace is never empty").total,
    })
}

pub fn worker_count(jobs: usize) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(available);
    cap.min(jobs).max(1)
}

/// Runs `jobs` through `f` on a bounded pool; results come back in job order.
fn run_parallel<T: Send>(jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(jobs));
    std::thread::scope(|scope| {
        for _ in 0..worker_count(jobs) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let out = f(i);
                done.lock().expect("no worker panicked").push((i, out));
            });
        }
    });
    let mut done = done.into_inner().expect("no worker panicked");
    done.sort_by_key(|(i, _)| *i);
    done.into_iter().map(|(_, out)| out).collect()
}

fn prefix(cell: &Cell, seed: &str) -> String {
    format!("{},{},{},{seed}", cell.lambda, cell.ratio, cell.p)
}

fn render(cells: &[Cell], results: &[Result<Outcome>], seeds_per_point: usize) -> String {
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for (point_cells, point_results) in cells
        .chunks(seeds_per_point)
        .zip(results.chunks(seeds_per_point))
    {
        for (cell, result) in point_cells.iter().zip(point_results) {
            let pre = prefix(cell, &cell.seed.to_string());
            match result {
                Ok(o) if o.metrics.is_empty() => {
                    let _ = writeln!(csv, "{pre},-,,,{},{}", o.iters, o.total);
                }
                Ok(o) => {
                    for &(h, nmi, ac) in &o.metrics {
                        let _ = writeln!(csv, "{pre},{h},{nmi},{ac},{},{}", o.iters, o.total);
                    }
                }
                Err(_) => {
                    let _ = writeln!(csv, "{pre},failed,,,,");
                }
            }
        }

        let ok: Vec<&Outcome> = point_results.iter().filter_map(|r| r.as_ref().ok()).collect();
        let pre = prefix(&point_cells[0], "mean");
        if ok.is_empty() {
            let _ = writeln!(csv, "{pre},failed,,,,");
            continue;
        }
        let n = ok.len() as f64;
        let iters = ok.iter().map(|o| o.iters as f64).sum::<f64>() / n;
        let total = ok.iter().map(|o| o.total).sum::<f64>() / n;
        let types: Vec<usize> = ok[0].metrics.iter().map(|m| m.0).collect();
        if types.is_empty() {
            let _ = writeln!(csv, "{pre},-,,,{iters},{total}");
        }
        for (t, h) in types.into_iter().enumerate() {
            let nmi = ok.iter().map(|o| o.metrics[t].1).sum::<f64>() / n;
            let ac = ok.iter().map(|o| o.metrics[t].2).sum::<f64>() / n;
            let _ = writeln!(csv, "{pre},{h},{nmi},{ac},{iters},{total}");
        }
    }
    csv
}

pub fn run(args: &SweepArgs) -> Result<()> {
    let lambdas = parse_f64_list(&args.lambdas, "lambda").map_err(usage)?;
    let ratios = parse_f64_list(&args.delta_ratios, "delta ratio").map_err(usage)?;
    let ps = parse_usize_list(&args.ps, "p").map_err(usage)?;
    let seeds = parse_usize_list(&args.seeds, "seed").map_err(usage)?;
    let dataset = load_dataset(&args.manifest)
        .with_context(|| format!("loading {}", args.manifest.display()))?;
    // Surface flag problems once, before any worker starts.
    solver_config(&dataset, &args.solver, lambdas[0], 0.0, ps[0], 0)?;

    let mut cells = Vec::new();
    for &lambda in &lambdas {
        for &ratio in &ratios {
            for &p in &ps {
                for &seed in &seeds {
                    cells.push(Cell { lambda, ratio, p, seed: seed as u64 });
                }
            }
        }
    }
    let results = run_parallel(cells.len(), |i| run_cell(&dataset, &args.solver, cells[i]));
    for (cell, result) in cells.iter().zip(&results) {
        if let Err(e) = result {
            eprintln!("cell {} failed: {e:#}", prefix(cell, &cell.seed.to_string()));
        }
    }
    let csv = render(&cells, &results, seeds.len());
    match &args.out {
        Some(path) => std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}
