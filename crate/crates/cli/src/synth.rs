use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use manifold_mtf::data::{generate_synthetic, save_dataset, SyntheticSpec};

use crate::grid::parse_usize_list;
use crate::usage;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of object types m.
    #[arg(long)]
    pub types: usize,
    /// Objects per type, comma separated; a single value is used for every type.
    #[arg(long)]
    pub sizes: String,
    #[arg(long)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// In-block value.
    #[arg(long, default_value_t = 1.0)]
    pub strength: f64,
    /// Off-block entries are drawn from noise * U(0, 1).
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Probability that an entry is left empty.
    #[arg(long, default_value_t = 0.5)]
    pub sparsity: f64,
    #[arg(long, default_value = "synthetic")]
    pub out: PathBuf,
}

pub fn resolve_sizes(types: usize, sizes: &str) -> Result<Vec<usize>> {
    let sizes = parse_usize_list(sizes, "size").map_err(usage)?;
    match sizes.len() {
        1 => Ok(vec![sizes[0]; types]),
        n if n == types => Ok(sizes),
        n => Err(usage(format!("--sizes lists {n} values for {types} types"))),
    }
}

pub fn run(args: &SynthArgs) -> Result<()> {
    if args.types < 2 {
        return Err(usage("--types must be at least 2"));
    }
    let spec = SyntheticSpec {
        sizes: resolve_sizes(args.types, &args.sizes)?,
        clusters: args.clusters,
        block_strength: args.strength,
        noise: args.noise,
        sparsity: args.sparsity,
        seed: args.seed,
    };
    let dataset = generate_synthetic(&spec)?;
    let manifest = save_dataset(&dataset, &args.out)
        .with_context(|| format!("writing dataset to {}", args.out.display()))?;
    println!("wrote {}", manifest.display());
    for (&(h, l), r) in dataset.relations() {
        println!("R_{h}_{l}: {}x{}, {} entries", r.rows(), r.cols(), r.nnz());
    }
    Ok(())
}
