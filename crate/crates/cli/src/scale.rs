use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use clap::Args;
use manifold_mtf::data::{generate_synthetic, MultiAspectDataset, SyntheticSpec};
use manifold_mtf::graphs::GraphSet;
use manifold_mtf::linalg::SparseMatrix;
use manifold_mtf::solver::{self, SolverConfig};

use crate::grid::{parse_f64_list, parse_usize_list};
use crate::synth::resolve_sizes;
use crate::usage;

pub const SCALE_HEADER: &str =
    "multiplier,sizes,nnz,graph_secs,iter_secs,graph_plus_iter_secs,memory_bytes";

#[derive(Debug, Args)]
pub struct ScaleArgs {
    #[arg(long, default_value_t = 3)]
    pub types: usize,
    /// Base objects per type; a single value is used for every type.
    #[arg(long, default_value = "200")]
    pub sizes: String,
    #[arg(long, default_value_t = 4)]
    pub clusters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub strength: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sparsity: f64,
    /// Size multipliers, e.g. `1,2,4`.
    #[arg(long, default_value = "1,2,4")]
    pub schedule: String,
    /// Types whose size is multiplied; the others keep their base size.
    #[arg(long, default_value = "0")]
    pub grow: String,
    /// Iterations timed per run.
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    /// Each timing is the minimum over this many runs.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta_ratio: f64,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn sparse_bytes(m: &SparseMatrix) -> usize {
    m.nnz() * 16 + (m.rows() + 1) * 8
}

/// Bytes held by the relations, the graphs and the dense factors.
pub fn memory_estimate(dataset: &MultiAspectDataset, graphs: &GraphSet, clusters: usize) -> usize {
    let relations: usize = dataset.relations().values().map(sparse_bytes).sum();
    let intra: usize = graphs
        .intra
        .iter()
        .map(|g| sparse_bytes(&g.w) + sparse_bytes(&g.laplacian) + 8 * g.degree.size())
        .sum();
    let inter: usize = graphs
        .inter
        .values()
        .map(|g| sparse_bytes(&g.z) + 8 * (g.row_degree.size() + g.col_degree.size()))
        .sum();
    let agg = &graphs.aggregates;
    let aggregates: usize = agg.q.iter().map(sparse_bytes).sum::<usize>()
        + agg.q_pair.values().map(sparse_bytes).sum::<usize>()
        + agg.t.iter().map(|t| 8 * t.size()).sum::<usize>();
    let factors = 8 * clusters * (dataset.sizes().iter().sum::<usize>() + clusters * dataset.relations().len());
    relations + intra + inter + aggregates + factors
}

struct Timing {
    graph: Duration,
    per_iter: Duration,
    memory: usize,
}

fn time_once(dataset: &MultiAspectDataset, config: &SolverConfig) -> Result<Timing> {
    let start = Instant::now();
    let graphs = GraphSet::build(dataset, config.k, config.p, config.lambda, config.delta)?;
    let graph = start.elapsed();
    let state = solver::init_factors(dataset, config)?;
    let start = Instant::now();
    let report = solver::iterate(dataset, &graphs, config, state)?;
    let iters = report.iterations.max(1) as u32;
    Ok(Timing {
        graph,
        per_iter: start.elapsed() / iters,
        memory: memory_estimate(dataset, &graphs, config.clusters),
    })
}

pub fn run(args: &ScaleArgs) -> Result<()> {
    if args.types < 2 {
        return Err(usage("--types must be at least 2"));
    }
    if args.repeats == 0 || args.iters == 0 {
        return Err(usage("--repeats and --iters must be at least 1"));
    }
    let base = resolve_sizes(args.types, &args.sizes)?;
    let schedule = parse_f64_list(&args.schedule, "multiplier").map_err(usage)?;
    let grow = parse_usize_list(&args.grow, "type").map_err(usage)?;
    if let Some(h) = grow.iter().find(|&&h| h >= args.types) {
        return Err(usage(format!("--grow names type {h} of {}", args.types)));
    }
    if let Some(x) = schedule.iter().find(|&&x| !(x > 0.0)) {
        return Err(usage(format!("multiplier {x} must be positive")));
    }

    let config = SolverConfig {
        clusters: args.clusters,
        lambda: args.lambda,
        delta: args.delta_ratio * args.lambda,
        k: args.k,
        p: args.p,
        max_iters: args.iters,
        // Run every iteration so each timing covers the same work.
        rel_tol: f64::MIN_POSITIVE,
        zero_floor: 1e-12,
        seed: args.seed,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;

    let mut csv = String::from(SCALE_HEADER);
    csv.push('\n');
    for &mult in &schedule {
        let sizes: Vec<usize> = base
            .iter()
            .enumerate()
            .map(|(h, &n)| if grow.contains(&h) { (n as f64 * mult).round() as usize } else { n })
            .collect();
        let dataset = generate_synthetic(&SyntheticSpec {
            sizes: sizes.clone(),
            clusters: args.clusters,
            block_strength: args.strength,
            noise: args.noise,
            sparsity: args.sparsity,
            seed: args.seed,
        })?;
        let mut best: Option<Timing> = None;
        for _ in 0..args.repeats {
            let t = time_once(&dataset, &config)?;
            best = Some(match best {
                None => t,
                Some(b) => Timing {
                    graph: b.graph.min(t.graph),
                    per_iter: b.per_iter.min(t.per_iter),
                    memory: t.memory,
                },
            });
        }
        let t = best.expect("at least one repeat");
        let nnz: usize = dataset.relations().values().map(SparseMatrix::nnz).sum();
        let sizes = sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
        let (g, i) = (t.graph.as_secs_f64(), t.per_iter.as_secs_f64());
        let _ = writeln!(csv, "{mult},{sizes},{nnz},{g:.6e},{i:.6e},{:.6e},{}", g + i, t.memory);
        eprintln!("multiplier {mult}: graphs {g:.4}s, {i:.4}s per iteration");
    }
    match &args.out {
        Some(path) => std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}
