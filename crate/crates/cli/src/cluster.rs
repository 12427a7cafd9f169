use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use manifold_mtf::data::{load_dataset, mtx, write_labels, MultiAspectDataset};
use manifold_mtf::graphs::type_feature_rows;
use manifold_mtf::metrics::MetricReport;
use manifold_mtf::solver::{self, ClusterSolution, ObjectiveBreakdown, SolverConfig};
use serde::Serialize;

use crate::usage;

/// Solver flags shared by `cluster` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Cluster count; defaults to the number of classes in the ground truth.
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Relative objective change that counts as converged.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub zero_floor: f64,
    /// Intra-type neighborhood size.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    /// Inter-type weight as a fraction of lambda.
    #[arg(long, default_value_t = 0.1)]
    pub delta_ratio: f64,
    /// Absolute inter-type weight; overrides --delta-ratio.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Inter-type neighborhood size.
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write every G_h and S_hl as MatrixMarket files.
    #[arg(long)]
    pub dump_factors: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

/// Class count of the labeled type with the most classes.
pub fn infer_clusters(dataset: &MultiAspectDataset) -> Option<usize> {
    dataset
        .truth()
        .values()
        .map(|t| t.iter().collect::<BTreeSet<_>>().len())
        .max()
}

pub fn solver_config(
    dataset: &MultiAspectDataset,
    args: &SolverArgs,
    lambda: f64,
    delta: f64,
    p: usize,
    seed: u64,
) -> Result<SolverConfig> {
    let clusters = match args.clusters {
        Some(c) => c,
        None => infer_clusters(dataset)
            .ok_or_else(|| usage("--clusters is required when the dataset has no labels"))?,
    };
    let config = SolverConfig {
        clusters,
        lambda,
        delta,
        k: args.k,
        p,
        max_iters: args.max_iters,
        rel_tol: args.tol,
        zero_floor: args.zero_floor,
        seed,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

#[derive(Serialize)]
struct RunConfig<'a> {
    manifest: &'a Path,
    delta_ratio: Option<f64>,
    solver: &'a SolverConfig,
}

pub const TRACE_HEADER: &str = "iter,reconstruction,intra,inter,total";

pub fn trace_csv(trace: &[ObjectiveBreakdown]) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for (t, o) in trace.iter().enumerate() {
        let _ = writeln!(s, "{t},{},{},{},{}", o.reconstruction, o.intra, o.inter, o.total);
    }
    s
}

/// Metrics for each labeled type, with cohesiveness over the type's features.
pub fn type_metrics(
    dataset: &MultiAspectDataset,
    labels: &[Vec<usize>],
) -> Result<Vec<(usize, MetricReport)>> {
    dataset
        .truth()
        .iter()
        .map(|(&h, truth)| {
            let features = type_feature_rows(dataset, h);
            Ok((h, MetricReport::evaluate(&labels[h], truth, Some(&features))?))
        })
        .collect()
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_artifacts(
    args: &ClusterArgs,
    config: &SolverConfig,
    solution: &ClusterSolution,
    metrics: &[(usize, MetricReport)],
) -> Result<()> {
    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (h, labels) in solution.labels.iter().enumerate() {
        write_labels(out.join(format!("labels_{h}.txt")), labels)?;
    }
    write(&out.join("trace.csv"), &trace_csv(&solution.report.trace))?;
    if !metrics.is_empty() {
        let mut s = format!("type,{}\n", MetricReport::CSV_HEADER);
        for (h, m) in metrics {
            let _ = writeln!(s, "{h},{}", m.csv_row());
        }
        write(&out.join("metrics.csv"), &s)?;
    }
    let snapshot = RunConfig {
        manifest: &args.manifest,
        delta_ratio: args.delta.is_none().then_some(args.delta_ratio),
        solver: config,
    };
    let mut json = serde_json::to_string_pretty(&snapshot)?;
    json.push('\n');
    write(&out.join("config.json"), &json)?;
    if args.dump_factors {
        let dir = out.join("factors");
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for (h, g) in solution.report.state.g.iter().enumerate() {
            mtx::write_dense(dir.join(format!("g_{h}.mtx")), g)?;
        }
        for ((h, l), s) in &solution.report.state.s {
            mtx::write_dense(dir.join(format!("s_{h}_{l}.mtx")), s)?;
        }
    }
    Ok(())
}

pub fn run(args: &ClusterArgs) -> Result<()> {
    let dataset = load_dataset(&args.manifest)
        .with_context(|| format!("loading {}", args.manifest.display()))?;
    let delta = args.delta.unwrap_or(args.delta_ratio * args.lambda);
    let config = solver_config(&dataset, &args.solver, args.lambda, delta, args.p, args.seed)?;
    let solution = solver::cluster(&dataset, &config)?;
    let metrics = type_metrics(&dataset, &solution.labels)?;
    write_artifacts(args, &config, &solution, &metrics)?;

    let report = &solution.report;
    let last = report.trace.last().expect("trace is never empty");
    println!(
        "iterations={} converged={}",
        report.iterations, report.converged
    );
    println!(
        "objective total={:.6} reconstruction={:.6} intra={:.6} inter={:.6}",
        last.total, last.reconstruction, last.intra, last.inter
    );
    for (h, m) in &metrics {
        println!("type {h}: {}", m.to_string().replace('\n', " "));
    }
    Ok(())
}
